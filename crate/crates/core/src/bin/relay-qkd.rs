fn main() {
    std::process::exit(relay_qkd::cli::run(std::env::args_os()));
}
