use clap::Parser;

fn main() {
    let cli = cgrasp::Cli::parse();
    match cgrasp::run(&cli) {
        Ok(summary) => {
            if !cli.quiet {
                println!("{summary}");
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
