fn main() {
    let mut stdout = std::io::stdout();
    let code = concov::cli::main_with_args(std::env::args_os(), &mut stdout);
    std::process::exit(code);
}
