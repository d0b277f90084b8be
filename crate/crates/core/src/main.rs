fn main() {
    let (code, out) = operad_forge::cli::run(std::env::args_os().skip(1));
    if code == operad_forge::cli::EXIT_ERROR {
        eprint!("{out}");
    } else {
        print!("{out}");
    }
    std::process::exit(code);
}
