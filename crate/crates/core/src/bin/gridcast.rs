fn main() {
    std::process::exit(gridcast::cli::run(std::env::args_os()));
}
