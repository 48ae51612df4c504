fn main() {
    std::process::exit(apflow::run_cli());
}
