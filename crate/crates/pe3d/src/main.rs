fn main() {
    std::process::exit(pe3d::cli::run_cli());
}
