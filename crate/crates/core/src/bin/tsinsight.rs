fn main() {
    std::process::exit(tsinsight::cli::run(std::env::args_os()));
}
