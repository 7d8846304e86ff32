fn main() {
    std::process::exit(psweight::cli::run(std::env::args_os()));
}
