fn main() {
    std::process::exit(arw_lab::cli::run(std::env::args_os()));
}
