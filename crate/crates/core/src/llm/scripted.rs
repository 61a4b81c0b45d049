use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatMessage, Completion, LlmError, ProposalSource, RequestRole};

/// Canned responses per request role, consumed in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Playbook {
    #[serde(default)]
    pub reward: Vec<String>,
    #[serde(default)]
    pub dr: Vec<String>,
}

impl Playbook {
    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        serde_json::from_str(text).map_err(|e| LlmError::InvalidPlaybook(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::InvalidPlaybook(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn entries(&self, role: RequestRole) -> &[String] {
        match role {
            RequestRole::Reward => &self.reward,
            RequestRole::Dr => &self.dr,
        }
    }
}

/// Deterministic stand-in for a live model. Records every request.
#[derive(Debug, Default)]
pub struct ScriptedSource {
    playbook: Playbook,
    cursors: Mutex<BTreeMap<RequestRole, usize>>,
    requests: Mutex<Vec<(RequestRole, Vec<ChatMessage>)>>,
}

impl ScriptedSource {
    pub fn new(playbook: Playbook) -> Self {
        Self { playbook, ..Default::default() }
    }

    /// Every request received so far, in arrival order.
    pub fn requests(&self) -> Vec<(RequestRole, Vec<ChatMessage>)> {
        self.requests.lock().expect("lock").clone()
    }

    pub fn consumed(&self, role: RequestRole) -> usize {
        self.cursors.lock().expect("lock").get(&role).copied().unwrap_or(0)
    }
}

impl ProposalSource for ScriptedSource {
    fn complete(&self, role: RequestRole, messages: &[ChatMessage]) -> Result<Completion, LlmError> {
        self.requests.lock().expect("lock").push((role, messages.to_vec()));
        let mut cursors = self.cursors.lock().expect("lock");
        let index = cursors.entry(role).or_insert(0);
        let text = self
            .playbook
            .entries(role)
            .get(*index)
            .cloned()
            .ok_or(LlmError::PlaybookExhausted { role, index: *index })?;
        *index += 1;
        Ok(Completion { text, retry_count: 0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::llm_complete;

    #[test]
    fn replays_in_order_then_exhausts() {
        let pb = Playbook::from_json(r#"{"reward": ["a", "b"], "dr": [""]}"#).unwrap();
        let s = ScriptedSource::new(pb);
        let m = [ChatMessage::user("hi")];
        assert_eq!(llm_complete(&s, RequestRole::Reward, &m).unwrap().text, "a");
        assert_eq!(llm_complete(&s, RequestRole::Reward, &m).unwrap().text, "b");
        assert_eq!(
            llm_complete(&s, RequestRole::Reward, &m),
            Err(LlmError::PlaybookExhausted { role: RequestRole::Reward, index: 2 })
        );
        assert_eq!(llm_complete(&s, RequestRole::Dr, &m), Err(LlmError::EmptyCompletion));
        assert_eq!(llm_complete(&s, RequestRole::Dr, &[]), Err(LlmError::NoMessages));
        assert_eq!(s.requests().len(), 4);
    }
}
