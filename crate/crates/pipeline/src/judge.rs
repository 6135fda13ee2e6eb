//! The entailment jury: asks each judge model whether a source article
//! entails its rewrite, and turns the answers into votes.

use f3_core::detect::{parse_yes_no, LabelRule};
use f3_core::purify::{JudgeVerdict, JudgeVote};
use f3_gateway::{Gateway, ProviderConfig, RecordStatus};

use crate::PipelineError;

/// Role line for the entailment question.
pub const JUDGE_IMPERSONATOR: &str = "You are an AI fact checker.";

/// The question put to each judge. It follows the detection composition —
/// role first, the material next, the instruction last — and constrains
/// the answer to yes/no so votes parse deterministically.
pub fn entailment_prompt(source: &str, generated: &str) -> String {
    format!(
        "{JUDGE_IMPERSONATOR}\n\nSource article:\n{source}\n\nRewritten article:\n{generated}\n\nDoes the source article logically entail the rewritten article? Answer yes or no."
    )
}

/// Interpret one judge's reply. A refusal, transport failure, or answer
/// with no standalone yes/no abstains rather than guessing.
pub fn vote_from_reply(status: RecordStatus, reply: &str) -> JudgeVote {
    if status != RecordStatus::Ok {
        return JudgeVote::Abstain;
    }
    match parse_yes_no(reply, LabelRule::FirstToken) {
        Some(true) => JudgeVote::Entail,
        Some(false) => JudgeVote::NotEntail,
        None => JudgeVote::Abstain,
    }
}

/// Collect one vote per judge for a source/rewrite pair.
pub fn judge_pair(
    gateway: &mut Gateway,
    judges: &[ProviderConfig],
    source: &str,
    generated: &str,
) -> Result<Vec<JudgeVerdict>, PipelineError> {
    let prompt = entailment_prompt(source, generated);
    let mut verdicts = Vec::with_capacity(judges.len());
    for judge in judges {
        let record = gateway.complete(judge, &prompt)?;
        verdicts.push(JudgeVerdict {
            judge_id: judge.provider_id.clone(),
            vote: vote_from_reply(record.status, &record.response_text),
        });
    }
    Ok(verdicts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use f3_gateway::{ApiShape, GenerationParams, MockRule, MockScript, MockTransport, Store};

    fn judge(id: &str) -> ProviderConfig {
        ProviderConfig {
            provider_id: id.into(),
            model_name: format!("{id}-model"),
            api: ApiShape::Mock,
            endpoint: String::new(),
            params: GenerationParams::default(),
            rate_limit_rpm: 6000,
            auth_env_var: String::new(),
        }
    }

    #[test]
    fn replies_map_to_votes_and_everything_else_abstains() {
        assert_eq!(vote_from_reply(RecordStatus::Ok, "Yes, it is entailed."), JudgeVote::Entail);
        assert_eq!(vote_from_reply(RecordStatus::Ok, "no"), JudgeVote::NotEntail);
        assert_eq!(vote_from_reply(RecordStatus::Ok, "hard to say"), JudgeVote::Abstain);
        assert_eq!(vote_from_reply(RecordStatus::Refused, "yes"), JudgeVote::Abstain);
        assert_eq!(vote_from_reply(RecordStatus::Error, ""), JudgeVote::Abstain);
    }

    #[test]
    fn prompt_places_the_question_after_both_texts() {
        let prompt = entailment_prompt("the source", "the rewrite");
        let role = prompt.find(JUDGE_IMPERSONATOR).unwrap();
        let source = prompt.find("the source").unwrap();
        let rewrite = prompt.find("the rewrite").unwrap();
        let question = prompt.find("Answer yes or no").unwrap();
        assert!(role < source && source < rewrite && rewrite < question);
    }

    #[test]
    fn panel_returns_one_attributed_vote_per_judge() {
        // Judges share a transport; differing models give them distinct
        // cache identities, and rules answer by judge model name... but
        // prompts are identical across judges, so instead script a single
        // uniform answer and check attribution.
        let script = MockScript {
            rules: vec![MockRule {
                when_contains: vec!["Rewritten article:".into()],
                respond: "yes".into(),
                fail: None,
            }],
            ..MockScript::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let mut gateway = Gateway::live(
            Store::open(dir.path()).unwrap(),
            Box::new(MockTransport::new(script)),
        );
        let judges = vec![judge("j1"), judge("j2"), judge("j3")];
        let verdicts = judge_pair(&mut gateway, &judges, "src", "gen").unwrap();
        assert_eq!(verdicts.len(), 3);
        for (verdict, judge) in verdicts.iter().zip(&judges) {
            assert_eq!(verdict.judge_id, judge.provider_id);
            assert_eq!(verdict.vote, JudgeVote::Entail);
        }
    }
}
