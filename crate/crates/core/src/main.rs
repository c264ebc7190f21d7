fn main() {
    std::process::exit(hdichotomy::cli::run(std::env::args_os()));
}
