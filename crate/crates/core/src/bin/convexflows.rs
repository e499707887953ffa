fn main() {
    std::process::exit(convexflows::cli::run(std::env::args_os()));
}
