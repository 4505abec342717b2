fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(ncpsatz::cli::run(&argv));
}
