fn main() {
    hiereval::cli::init_logging();
    let status = hiereval::cli::run(std::env::args_os());
    std::process::exit(status.code);
}
