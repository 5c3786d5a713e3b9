fn main() {
    std::process::exit(sqss::cli::main());
}
