fn main() {
    std::process::exit(esnfd::run(std::env::args_os()));
}
