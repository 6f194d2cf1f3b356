use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Speaker {
    #[serde(alias = "bot", alias = "Bot", alias = "chatbot", alias = "system")]
    Bot,
    #[serde(alias = "user", alias = "User", alias = "human")]
    User,
}

impl Speaker {
    pub fn other(self) -> Speaker {
        match self {
            Speaker::Bot => Speaker::User,
            Speaker::User => Speaker::Bot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    pub turn_index: usize,
}

impl Turn {
    pub fn new(speaker: Speaker, text: impl Into<String>, turn_index: usize) -> Self {
        Turn {
            speaker,
            text: text.into(),
            turn_index,
        }
    }
}

/// Turns from plain texts, alternating speakers starting with the bot.
pub fn alternating_turns<I, T>(texts: I) -> Vec<Turn>
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let speaker = if i % 2 == 0 { Speaker::Bot } else { Speaker::User };
            Turn::new(speaker, t, i)
        })
        .collect()
}
