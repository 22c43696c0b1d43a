fn main() -> std::process::ExitCode {
    hjb_core::cli::main_entry()
}
