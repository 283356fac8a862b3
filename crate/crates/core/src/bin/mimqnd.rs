fn main() {
    std::process::exit(mimqnd::cli::run(std::env::args_os()));
}
