//! Prompt templates. Defaults are compiled in from `config/prompts/`; a
//! directory with files of the same names overrides them.

use std::path::Path;

macro_rules! template {
    ($name:literal) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../config/prompts/", $name, ".txt"))
    };
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompts {
    pub system: String,
    pub task: String,
    pub directive: String,
    pub history: String,
    pub reflection: String,
    pub decision: String,
    pub supervisor: String,
    pub critic: String,
    pub extractor: String,
    pub extractor_repair: String,
}

impl Default for Prompts {
    fn default() -> Self {
        Prompts {
            system: template!("system").into(),
            task: template!("task").into(),
            directive: template!("directive").into(),
            history: template!("history").into(),
            reflection: template!("reflection").into(),
            decision: template!("decision").into(),
            supervisor: template!("supervisor").into(),
            critic: template!("critic").into(),
            extractor: template!("extractor").into(),
            extractor_repair: template!("extractor_repair").into(),
        }
    }
}

impl Prompts {
    /// Defaults, with any `<name>.txt` found in `dir` taking precedence.
    pub fn load(dir: &Path) -> std::io::Result<Self> {
        let mut p = Prompts::default();
        let slots: [(&str, &mut String); 10] = [
            ("system", &mut p.system),
            ("task", &mut p.task),
            ("directive", &mut p.directive),
            ("history", &mut p.history),
            ("reflection", &mut p.reflection),
            ("decision", &mut p.decision),
            ("supervisor", &mut p.supervisor),
            ("critic", &mut p.critic),
            ("extractor", &mut p.extractor),
            ("extractor_repair", &mut p.extractor_repair),
        ];
        for (name, slot) in slots {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                *slot = std::fs::read_to_string(path)?;
            }
        }
        Ok(p)
    }
}

/// Replaces each `{{key}}` with its value. Unknown placeholders stay as is.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out
}
