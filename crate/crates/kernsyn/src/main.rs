fn main() {
    std::process::exit(kernsyn::cli::run(std::env::args_os()));
}
