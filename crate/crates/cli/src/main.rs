fn main() {
    std::process::exit(platesift_cli::run(std::env::args_os()));
}
