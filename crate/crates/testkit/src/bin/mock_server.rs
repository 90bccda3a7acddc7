//! Stand-alone mock server for demo runs:
//! `semchunk-mock-server --dir <fixture-dir>` generates the fixture corpus
//! there (if missing) and serves the matching mock endpoint until killed.

use std::path::PathBuf;

use semchunk_testkit::{build_corpus, Behavior, MockServer};

fn main() -> std::io::Result<()> {
    let mut dir = PathBuf::from("fixture-corpus");
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--dir" => {
                dir = PathBuf::from(args.next().expect("--dir needs a value"));
            }
            "--help" | "-h" => {
                println!("usage: semchunk-mock-server [--dir <fixture-dir>]");
                return Ok(());
            }
            other => {
                eprintln!("unknown argument: {other}");
                std::process::exit(2);
            }
        }
    }

    let corpus = build_corpus(&dir)?;
    let server = MockServer::start(Behavior::for_fixture(&corpus))?;
    println!("fixture corpus: {}", corpus.dir.display());
    println!("endpoint:       {}", server.endpoint());
    println!("serving; press Ctrl-C to stop");
    loop {
        std::thread::sleep(std::time::Duration::from_secs(3600));
    }
}
