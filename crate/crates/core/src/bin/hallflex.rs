fn main() {
    std::process::exit(hallflex::cli_io::run(std::env::args_os().skip(1)));
}
