use clap::{CommandFactory, Parser};
use edo_cli::{run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let mut cmd = Cli::command();
            cmd.build();
            let usage = match std::env::args()
                .nth(1)
                .and_then(|s| cmd.find_subcommand_mut(&s).cloned())
            {
                Some(mut sub) => sub.render_usage(),
                None => cmd.render_usage(),
            };
            eprintln!("{e}\n{usage}");
            std::process::exit(2);
        }
    };
    match run(cli) {
        Ok(summary) => println!("{summary}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
