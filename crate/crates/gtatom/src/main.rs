fn main() {
    std::process::exit(gtatom::cli::run(std::env::args_os()));
}
