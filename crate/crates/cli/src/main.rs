fn main() {
    std::process::exit(fdscope_cli::run(std::env::args_os()));
}
