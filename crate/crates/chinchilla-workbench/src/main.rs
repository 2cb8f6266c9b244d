fn main() {
    std::process::exit(chinchilla_workbench::cli::run());
}
