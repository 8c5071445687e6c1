fn main() {
    std::process::exit(aan_offload::cli::run(std::env::args_os()));
}
