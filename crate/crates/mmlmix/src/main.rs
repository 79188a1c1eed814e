fn main() {
    std::process::exit(mmlmix::cli::run(std::env::args_os()));
}
