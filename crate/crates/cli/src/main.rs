fn main() {
    std::process::exit(adcnn_cli::run(std::env::args_os()));
}
