fn main() {
    std::process::exit(stemtrace::cli::run(std::env::args_os()));
}
