use std::process::ExitCode;

fn main() -> ExitCode {
    match homspec::cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(clap) = e.downcast_ref::<clap::Error>() {
                let _ = clap.print();
                return if clap.use_stderr() {
                    ExitCode::from(2)
                } else {
                    ExitCode::SUCCESS
                };
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
