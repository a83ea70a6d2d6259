fn main() {
    std::process::exit(dlcz_swap::cli::run(std::env::args_os()));
}
