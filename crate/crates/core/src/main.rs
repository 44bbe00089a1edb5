fn main() {
    std::process::exit(uedp::cli::run(std::env::args_os()));
}
