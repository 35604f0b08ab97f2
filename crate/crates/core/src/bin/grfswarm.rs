fn main() {
    std::process::exit(grfswarm::cli::main());
}
