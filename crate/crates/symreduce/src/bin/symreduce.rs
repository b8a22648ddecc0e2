fn main() {
    std::process::exit(symreduce::cli::main_with(std::env::args_os()));
}
