fn main() {
    std::process::exit(forkguard::cli::run(std::env::args_os()));
}
