//! A tiny `/bin/sh` emulator over a virtual filesystem.
//!
//! Supported: single-quote grouping, `;` and newline separation, absolute
//! and `PATH` command resolution, `?`/`*` globs, and the `date`, `cat`,
//! `echo`, `ls` commands. Anything else (`$(...)`, backticks, variables,
//! double quotes, redirection) is passed through literally. Stdout and
//! stderr are interleaved as with `2>&1`.
//!
//! The blacklist is checked against each command's name after quote
//! removal and before glob expansion; a hit replaces the command with the
//! empty string, which `sh` rejects with `Permission denied`.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike, Timelike, Utc};

const EXEC_MAGIC: &[u8] = b"\x7fELF\x02\x01\x01";
const PATH: &[&str] = &["/bin", "/usr/bin"];

/// Flat in-memory filesystem; directories are implied by file paths.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vfs {
    files: BTreeMap<String, Vec<u8>>,
}

impl Vfs {
    pub fn new() -> Self {
        Vfs::default()
    }

    pub fn insert(&mut self, path: &str, content: impl Into<Vec<u8>>) {
        self.files.insert(normalize(path), content.into());
    }

    pub fn with_executables(mut self, names: &[&str]) -> Self {
        for n in names {
            self.insert(&format!("/bin/{n}"), EXEC_MAGIC);
        }
        self
    }

    pub fn file(&self, path: &str) -> Option<&[u8]> {
        self.files.get(path).map(Vec::as_slice)
    }

    pub fn is_dir(&self, path: &str) -> bool {
        if path == "/" {
            return true;
        }
        let prefix = format!("{}/", path.trim_end_matches('/'));
        self.files.keys().any(|k| k.starts_with(&prefix))
    }

    fn is_exec(&self, path: &str) -> bool {
        self.file(path).is_some_and(|c| c.starts_with(EXEC_MAGIC))
    }

    /// Every file and implied directory, as absolute paths.
    pub fn entries(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for k in self.files.keys() {
            out.insert(k.clone());
            let mut p = k.as_str();
            while let Some(i) = p.rfind('/') {
                p = &p[..i];
                if p.is_empty() {
                    break;
                }
                out.insert(p.to_string());
            }
        }
        out
    }

    /// Names directly inside `dir`, sorted.
    pub fn children(&self, dir: &str) -> Vec<String> {
        let prefix = if dir == "/" { "/".to_string() } else { format!("{}/", dir.trim_end_matches('/')) };
        let mut names: BTreeSet<String> = BTreeSet::new();
        for e in self.entries() {
            if let Some(rest) = e.strip_prefix(&prefix) {
                if !rest.is_empty() && !rest.contains('/') {
                    names.insert(rest.to_string());
                }
            }
        }
        names.into_iter().collect()
    }
}

/// Resolves `.` and `..` lexically; the result is absolute.
pub fn normalize(path: &str) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for seg in path.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            s => parts.push(s),
        }
    }
    format!("/{}", parts.join("/"))
}

/// A word with per-character quoting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Word {
    chars: Vec<(char, bool)>,
}

impl Word {
    fn text(&self) -> String {
        self.chars.iter().map(|(c, _)| *c).collect()
    }

    fn has_glob(&self) -> bool {
        self.chars.iter().any(|(c, q)| !q && (*c == '*' || *c == '?'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Command {
    line: usize,
    words: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Item {
    Run(Command),
    SyntaxError { line: usize, message: String },
}

fn tokenize(script: &str) -> Vec<Item> {
    let mut items = Vec::new();
    let mut line = 1usize;
    let mut words: Vec<Word> = Vec::new();
    let mut word: Option<Word> = None;
    let mut start: Option<usize> = None;
    let mut in_single = false;

    fn end_word(word: &mut Option<Word>, words: &mut Vec<Word>) {
        if let Some(w) = word.take() {
            words.push(w);
        }
    }

    for c in script.chars() {
        if in_single {
            if c == '\'' {
                in_single = false;
            } else {
                word.get_or_insert_with(Word::default).chars.push((c, true));
                if c == '\n' {
                    line += 1;
                }
            }
            continue;
        }
        match c {
            '\'' => {
                start.get_or_insert(line);
                word.get_or_insert_with(Word::default);
                in_single = true;
            }
            ' ' | '\t' => end_word(&mut word, &mut words),
            ';' | '\n' => {
                end_word(&mut word, &mut words);
                if words.is_empty() && c == ';' {
                    items.push(Item::SyntaxError {
                        line,
                        message: "\";\" unexpected".into(),
                    });
                    return items;
                }
                if !words.is_empty() {
                    items.push(Item::Run(Command {
                        line: start.take().unwrap_or(line),
                        words: std::mem::take(&mut words),
                    }));
                }
                start = None;
                if c == '\n' {
                    line += 1;
                }
            }
            _ => {
                start.get_or_insert(line);
                word.get_or_insert_with(Word::default).chars.push((c, false));
            }
        }
    }
    if in_single {
        items.push(Item::SyntaxError {
            line,
            message: "Unterminated quoted string".into(),
        });
        return items;
    }
    end_word(&mut word, &mut words);
    if !words.is_empty() {
        items.push(Item::Run(Command {
            line: start.unwrap_or(line),
            words,
        }));
    }
    items
}

fn glob_match(pattern: &[(char, bool)], name: &[char]) -> bool {
    match pattern.split_first() {
        None => name.is_empty(),
        Some(((c, quoted), rest)) => {
            if !quoted && *c == '*' {
                (0..=name.len())
                    .take_while(|i| *i == 0 || name[*i - 1] != '/')
                    .any(|i| glob_match(rest, &name[i..]))
            } else if !quoted && *c == '?' {
                !name.is_empty() && name[0] != '/' && glob_match(rest, &name[1..])
            } else {
                !name.is_empty() && name[0] == *c && glob_match(rest, &name[1..])
            }
        }
    }
}

pub struct Shell<'a> {
    pub vfs: &'a Vfs,
    pub blacklist: &'a [String],
    pub cwd: &'a str,
    pub now: DateTime<Utc>,
}

impl Shell<'_> {
    fn absolute(&self, p: &str) -> String {
        if p.starts_with('/') {
            normalize(p)
        } else {
            normalize(&format!("{}/{p}", self.cwd))
        }
    }

    fn expand(&self, w: &Word) -> Vec<String> {
        if !w.has_glob() {
            return vec![w.text()];
        }
        let absolute = w.chars.first().is_some_and(|(c, _)| *c == '/');
        let mut hits: Vec<String> = Vec::new();
        for e in self.vfs.entries() {
            let candidate = if absolute {
                e.clone()
            } else {
                match e.strip_prefix(&format!("{}/", self.cwd)) {
                    Some(rel) => rel.to_string(),
                    None => continue,
                }
            };
            let chars: Vec<char> = candidate.chars().collect();
            if glob_match(&w.chars, &chars) {
                hits.push(candidate);
            }
        }
        if hits.is_empty() {
            vec![w.text()]
        } else {
            hits.sort();
            hits
        }
    }

    /// Runs `script` and returns the interleaved output.
    pub fn run(&self, script: &str) -> String {
        let mut out = String::new();
        for item in tokenize(script) {
            match item {
                Item::Run(cmd) => self.exec(&cmd, &mut out),
                Item::SyntaxError { line, message } => {
                    out.push_str(&format!("sh: {line}: Syntax error: {message}\n"));
                    break;
                }
            }
        }
        out
    }

    fn exec(&self, cmd: &Command, out: &mut String) {
        let line = cmd.line;
        let first = cmd.words[0].text();
        let blocked = self.blacklist.iter().any(|k| !k.is_empty() && first.contains(k.as_str()));
        let mut argv: Vec<String> = Vec::new();
        if blocked {
            argv.push(String::new());
            for w in &cmd.words[1..] {
                argv.extend(self.expand(w));
            }
        } else {
            for w in &cmd.words {
                argv.extend(self.expand(w));
            }
        }
        let name = argv[0].clone();
        let args = &argv[1..];
        if name.is_empty() {
            out.push_str(&format!("sh: {line}: : Permission denied\n"));
            return;
        }
        if name == "echo" {
            return self.echo(args, out);
        }
        let resolved = if name.contains('/') {
            let p = self.absolute(&name);
            if self.vfs.is_exec(&p) {
                Some(p)
            } else if self.vfs.is_dir(&p) || self.vfs.file(&p).is_some() {
                out.push_str(&format!("sh: {line}: {name}: Permission denied\n"));
                return;
            } else {
                None
            }
        } else {
            PATH.iter()
                .map(|d| format!("{d}/{name}"))
                .find(|p| self.vfs.is_exec(p))
        };
        let Some(path) = resolved else {
            out.push_str(&format!("sh: {line}: {name}: not found\n"));
            return;
        };
        match path.rsplit('/').next().unwrap_or("") {
            "cat" => self.cat(args, out),
            "date" => self.date(args, out),
            "echo" => self.echo(args, out),
            "ls" => self.ls(args, out),
            other => out.push_str(&format!("sh: {line}: {other}: Exec format error\n")),
        }
    }

    fn echo(&self, args: &[String], out: &mut String) {
        out.push_str(&args.join(" "));
        out.push('\n');
    }

    fn cat(&self, args: &[String], out: &mut String) {
        for a in args {
            let p = self.absolute(a);
            match self.vfs.file(&p) {
                Some(c) => out.push_str(&String::from_utf8_lossy(c)),
                None if self.vfs.is_dir(&p) => out.push_str(&format!("cat: {a}: Is a directory\n")),
                None => out.push_str(&format!("cat: {a}: No such file or directory\n")),
            }
        }
    }

    fn ls(&self, args: &[String], out: &mut String) {
        let targets: Vec<String> = if args.is_empty() { vec![".".into()] } else { args.to_vec() };
        for a in &targets {
            let p = self.absolute(a);
            if self.vfs.is_dir(&p) {
                for c in self.vfs.children(&p) {
                    out.push_str(&c);
                    out.push('\n');
                }
            } else if self.vfs.file(&p).is_some() {
                out.push_str(a);
                out.push('\n');
            } else {
                out.push_str(&format!("ls: cannot access '{a}': No such file or directory\n"));
            }
        }
    }

    fn date(&self, args: &[String], out: &mut String) {
        match args.first() {
            None => {
                out.push_str(&strftime("%a %b %e %H:%M:%S %Z %Y", self.now));
                out.push('\n');
            }
            Some(a) if a.starts_with('+') => {
                out.push_str(&strftime(&a[1..], self.now));
                out.push('\n');
            }
            Some(a) => out.push_str(&format!("date: invalid date '{a}'\n")),
        }
    }
}

const DAYS: [&str; 7] = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"];
const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October",
    "November", "December",
];

/// `date +FORMAT` rendering; unknown specifiers are printed as written.
pub fn strftime(fmt: &str, t: DateTime<Utc>) -> String {
    let mut out = String::new();
    let mut chars = fmt.chars();
    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        let Some(spec) = chars.next() else {
            out.push('%');
            break;
        };
        let day = DAYS[t.weekday().num_days_from_monday() as usize];
        let month = MONTHS[t.month0() as usize];
        match spec {
            'Y' => out.push_str(&t.year().to_string()),
            'y' => out.push_str(&format!("{:02}", t.year() % 100)),
            'm' => out.push_str(&format!("{:02}", t.month())),
            'd' => out.push_str(&format!("{:02}", t.day())),
            'e' => out.push_str(&format!("{:>2}", t.day())),
            'H' => out.push_str(&format!("{:02}", t.hour())),
            'I' => out.push_str(&format!("{:02}", (t.hour() + 11) % 12 + 1)),
            'M' => out.push_str(&format!("{:02}", t.minute())),
            'S' => out.push_str(&format!("{:02}", t.second())),
            'j' => out.push_str(&format!("{:03}", t.ordinal())),
            'p' => out.push_str(if t.hour() < 12 { "AM" } else { "PM" }),
            'a' => out.push_str(&day[..3]),
            'A' => out.push_str(day),
            'b' | 'h' => out.push_str(&month[..3]),
            'B' => out.push_str(month),
            's' => out.push_str(&t.timestamp().to_string()),
            'Z' => out.push_str("UTC"),
            'z' => out.push_str("+0000"),
            'T' => out.push_str(&strftime("%H:%M:%S", t)),
            'D' => out.push_str(&strftime("%m/%d/%y", t)),
            'F' => out.push_str(&strftime("%Y-%m-%d", t)),
            'R' => out.push_str(&strftime("%H:%M", t)),
            'n' => out.push('\n'),
            't' => out.push('\t'),
            '%' => out.push('%'),
            other => {
                out.push('%');
                out.push(other);
            }
        }
    }
    out
}
