fn main() {
    std::process::exit(klturb::cli::run(std::env::args()));
}
