fn main() {
    let status = etrnn::cli::run_command(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(status.code());
}
