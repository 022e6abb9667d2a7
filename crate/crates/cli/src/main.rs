fn main() {
    std::process::exit(qcra_cli::args::run(std::env::args_os()));
}
