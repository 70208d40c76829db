fn main() {
    std::process::exit(webflow::cli::run(std::env::args_os()));
}
