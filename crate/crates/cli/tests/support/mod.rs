#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

pub fn fdscope() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fdscope"))
}

pub fn run(args: &[&str]) -> Output {
    fdscope().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A `fdscope serve` child bound to an ephemeral port; killed on drop.
pub struct Served {
    pub child: Child,
    pub base: String,
}

impl Served {
    pub fn start(root: &Path) -> Served {
        let mut child = fdscope()
            .args(["serve", "--addr", "127.0.0.1:0", "--workers", "2"])
            .env("FDSCOPE_STORAGE", root)
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("serve starts");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .expect("address line");
        let addr = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
            .to_owned();
        Served {
            child,
            base: format!("{addr}/api/v1"),
        }
    }

    /// SIGKILL, no shutdown path runs.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }

    pub fn client() -> reqwest::blocking::Client {
        reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .unwrap()
    }

    pub fn upload(&self, csv: &[u8], name: &str) -> String {
        let r: serde_json::Value = Self::client()
            .post(format!("{}/datasets?name={name}", self.base))
            .body(csv.to_vec())
            .send()
            .unwrap()
            .json()
            .unwrap();
        r["id"].as_str().expect("dataset id").to_owned()
    }

    pub fn submit(&self, kind: &str, dataset: &str, params: serde_json::Value) -> String {
        let r: serde_json::Value = Self::client()
            .post(format!("{}/tasks", self.base))
            .json(&serde_json::json!({"kind": kind, "dataset": dataset, "params": params}))
            .send()
            .unwrap()
            .json()
            .unwrap();
        r["id"].as_str().unwrap_or_else(|| panic!("submit failed: {r}")).to_owned()
    }

    pub fn wait(&self, task: &str) -> serde_json::Value {
        for _ in 0..3000 {
            let t: serde_json::Value = Self::client()
                .get(format!("{}/tasks/{task}", self.base))
                .send()
                .unwrap()
                .json()
                .unwrap();
            if t["status"] == "completed" || t["status"] == "failed" {
                return t;
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        panic!("task {task} did not finish");
    }

    pub fn post(&self, path: &str, body: serde_json::Value) -> (u16, serde_json::Value) {
        let r = Self::client()
            .post(format!("{}{path}", self.base))
            .json(&body)
            .send()
            .unwrap();
        (r.status().as_u16(), r.json().unwrap())
    }

    pub fn get(&self, path: &str) -> (u16, serde_json::Value) {
        let r = Self::client().get(format!("{}{path}", self.base)).send().unwrap();
        (r.status().as_u16(), r.json().unwrap())
    }
}

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
