fn main() {
    std::process::exit(cmnet::cli::run(std::env::args_os()));
}
