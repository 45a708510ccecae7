pub mod align;
pub mod bench;
pub mod build_dict;
pub mod decode;
pub mod eval;
pub mod simulate;
pub mod train_toy;

/// Global flags threaded through every subcommand.
pub struct Ctx {
    pub json: bool,
    pub no_timing: bool,
    pub seed: u64,
    pub verbose: bool,
}

impl Ctx {
    /// Prints a summary: the JSON value under `--json`, the human lines
    /// otherwise.
    pub fn emit(&self, value: &serde_json::Value, human: &[String]) {
        if self.json {
            println!("{value}");
        } else {
            for line in human {
                println!("{line}");
            }
        }
    }

    pub fn log(&self, message: &str) {
        if self.verbose {
            eprintln!("{message}");
        }
    }
}
