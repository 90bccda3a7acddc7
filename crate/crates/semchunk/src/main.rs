use std::process::ExitCode;

fn main() -> ExitCode {
    semchunk::cli::main()
}
