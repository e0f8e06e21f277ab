use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};

use super::*;
use crate::catalog::Catalog;
use crate::llm::{Gateway, MockEntry, MockScript, ScriptedMock, TemplateId, REFUSAL_LINE};
use crate::spec::{CharacterId, Role, Snippet};

fn entry(template: TemplateId, matcher: &[(&str, &str)], response: Value) -> MockEntry {
    MockEntry {
        template,
        key: None,
        matcher: Some(matcher.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()),
        response,
        latency_ms: None,
        fault: None,
    }
}

fn extractor_with(script: MockScript) -> (Extractor, Arc<ScriptedMock>) {
    let mock = Arc::new(ScriptedMock::new(script));
    (Extractor::new(Gateway::new(mock.clone()), Arc::new(Catalog::builtin())), mock)
}

fn extractor(entries: Vec<MockEntry>) -> (Extractor, Arc<ScriptedMock>) {
    extractor_with(MockScript { entries, ..MockScript::default() })
}

fn kelly_extractor() -> (Extractor, Arc<ScriptedMock>) {
    let text = include_str!("../../../../fixtures/kelly/mock.json");
    extractor_with(MockScript::from_json(text).unwrap())
}

const KELLY: &str = include_str!("../../../../fixtures/kelly/story.txt");

#[test]
fn narrator_only_story_has_no_npcs() {
    let (ex, _) = extractor(Vec::new());
    let cs = ex.extract_characters("I watered my plants.").unwrap();
    assert_eq!(cs.len(), 1);
    assert_eq!((cs[0].id.as_str(), cs[0].role), ("pc", Role::Pc));
}

#[test]
fn four_friends_exceed_the_cap_with_the_full_list() {
    let five = json!({ "characters": [
        { "name": "me", "role": "PC" }, { "name": "Ana", "role": "NPC" }, { "name": "Ben", "role": "NPC" },
        { "name": "Cal", "role": "NPC" }, { "name": "Dee", "role": "NPC" }
    ] });
    let (ex, _) = extractor(vec![entry(TemplateId::ExtractCharacters, &[("story", "four friends")], five)]);
    match ex.extract_characters("I went hiking with my four friends Ana, Ben, Cal and Dee.") {
        Err(ExtractError::CapExceeded { characters, max }) => {
            assert_eq!(max, 3);
            let names: Vec<_> = characters.iter().map(|c| c.name.as_str()).collect();
            assert_eq!(names, ["me", "Ana", "Ben", "Cal", "Dee"]);
        }
        other => panic!("expected CAP_EXCEEDED, got {other:?}"),
    }
}

#[test]
fn story_preconditions() {
    let (ex, _) = extractor(Vec::new());
    assert!(matches!(ex.start("  \n "), Err(ExtractError::EmptyStory)));
    assert!(matches!(ex.start(&"I ran. ".repeat(400)), Err(ExtractError::StoryTooLong { len: 2800, max: 2000 })));
    assert!(matches!(ex.start("Tom fed his cat and went to bed."), Err(ExtractError::NotFirstPerson)));
}

#[test]
fn unstated_persona_is_never_inferred() {
    let reply = json!({ "characters": [
        { "name": "me", "role": "PC", "mood": "happy" },
        { "name": "Rosa", "role": "NPC", "personality": "kind", "mood": "tired", "social_role": "sister" }
    ] });
    let (ex, _) = extractor(vec![entry(TemplateId::ExtractCharacters, &[("story", "Rosa")], reply)]);
    let cs = ex.extract_characters("My sister Rosa came over and I made tea.").unwrap();
    let rosa = &cs[1];
    assert_eq!(rosa.social_role.as_deref(), Some("sister"));
    assert_eq!((rosa.personality.as_deref(), rosa.mood.as_deref()), (None, None));
    assert_eq!(cs[0].mood, None);
}

#[test]
fn plural_pronouns_are_flagged_for_review() {
    let (ex, _) = extractor(Vec::new());
    let s = ex.start("We cooked together and then I cleaned up.").unwrap();
    assert!(s.flags.iter().any(|f| f.code == FlagCode::NeedsReview));
    let s = ex.start("I cooked and then I cleaned up.").unwrap();
    assert!(s.flags.iter().all(|f| f.code != FlagCode::NeedsReview));
}

#[test]
fn layout_selection_and_fallback() {
    let (ex, _) = extractor(vec![
        entry(TemplateId::SelectLayout, &[("story", "advisor")], json!({ "layout_id": "office" })),
        entry(TemplateId::SelectLayout, &[("story", "castle")], json!({ "layout_id": "castle" })),
    ]);
    assert_eq!(ex.select_layout("I met my advisor at her office."), ("office".to_string(), None));
    let (id, flag) = ex.select_layout("I toured a castle.");
    assert_eq!(id, "residential");
    assert_eq!(flag.unwrap().code, FlagCode::LayoutFallback);
}

#[test]
fn room_labels_cover_every_room() {
    let (ex, _) = extractor(Vec::new());
    let one = ex.label_rooms("studio", "I painted all day.").unwrap();
    assert_eq!(one.len(), 1);
    let (ex, _) = kelly_extractor();
    let labels = ex.label_rooms("residential", KELLY.trim()).unwrap();
    let values: Vec<&str> = labels.values().map(String::as_str).collect();
    for want in ["kitchen", "dining", "bedroom", "music room"] {
        assert!(values.contains(&want), "{want} missing from {values:?}");
    }
}

#[test]
fn kelly_events_leave_jack_out_of_dinner() {
    let (ex, _) = kelly_extractor();
    let mut s = ex.start(KELLY.trim()).unwrap();
    ex.confirm_rooms(&mut s, None, &BTreeMap::new()).unwrap();
    let tuples: Vec<Vec<(&str, &str, &str)>> = s
        .draft
        .key_events
        .iter()
        .map(|e| {
            e.activities
                .iter()
                .map(|a| {
                    let asset = &s.draft.environment.object(a.object_id.as_ref().unwrap()).unwrap().asset_id;
                    (a.character_id.as_str(), a.action.as_str(), asset.as_str())
                })
                .collect()
        })
        .collect();
    assert_eq!(
        tuples,
        vec![
            vec![("pc", "cooking dinner", "stove"), ("julie", "helping with cooking", "stove")],
            vec![("pc", "having dinner", "chair"), ("julie", "having dinner", "chair")],
            vec![("jack", "practicing guitar", "guitar"), ("julie", "singing a new song", "microphone")],
        ]
    );
}

fn studio_characters() -> Vec<Character> {
    vec![Character::new("pc", Role::Pc, "me")]
}

#[test]
fn action_without_an_object_is_flagged() {
    let actions = json!({ "actions": [{ "character": "me", "action": "cooking lunch", "object": "stove" }] });
    let (ex, _) = extractor(vec![entry(TemplateId::ExtractEvents, &[("phase", "actions")], actions)]);
    let env = ex.catalog().layout("studio").unwrap().instantiate(&BTreeMap::new());
    let d = ex.extract_events("I cooked lunch.", &studio_characters(), &env);
    assert_eq!(d.key_events.len(), 1);
    assert_eq!(d.key_events[0].activities.len(), 1);
    assert_eq!(d.key_events[0].activities[0].object_id, None);
    let flag = d.flags.iter().find(|f| f.code == FlagCode::NeedsObject).expect("NEEDS_OBJECT");
    assert_eq!(flag.path, "key_events[0].activities[0].object_id");
}

#[test]
fn grouping_that_skips_over_an_action_is_rejected() {
    let actions = json!({ "actions": [
        { "character": "me", "action": "waking up" },
        { "character": "me", "action": "making coffee" },
        { "character": "me", "action": "reading" }
    ] });
    let (ex, _) = extractor(vec![
        entry(TemplateId::ExtractEvents, &[("phase", "actions")], actions),
        entry(TemplateId::ExtractEvents, &[("phase", "group")], json!({ "groups": [[1, 3], [2]] })),
        entry(TemplateId::ExtractEvents, &[("phase", "order")], json!({ "order": [1, 0, 2] })),
    ]);
    let env = ex.catalog().layout("studio").unwrap().instantiate(&BTreeMap::new());
    let d = ex.extract_events("I woke up, made coffee and read.", &studio_characters(), &env);
    assert!(d.flags.iter().any(|f| f.code == FlagCode::GroupingRejected));
    let order: Vec<&str> = d.key_events.iter().map(|e| e.activities[0].action.as_str()).collect();
    assert_eq!(order, ["making coffee", "waking up", "reading"], "the scripted order applies to the singleton groups");
}

#[test]
fn suggestions_only_fill_blank_fields() {
    let (ex, _) = kelly_extractor();
    let mut jack = Character::new("jack", Role::Npc, "Jack");
    jack.conversation_snippets = vec![
        Snippet { speaker: "me".into(), utterance: "I burned the rice again.".into() },
        Snippet { speaker: "Jack".into(), utterance: "Don't worry, it happens. I'll help you make it again.".into() },
    ];
    assert_eq!(ex.suggest_persona(&jack).get("personality").map(String::as_str), Some("supportive"));

    jack.age = Some("30".into());
    jack.personality = Some("grumpy".into());
    jack.social_role = Some("friend".into());
    jack.mood = Some("calm".into());
    jack.language_style = Some("casual".into());
    assert!(ex.suggest_persona(&jack).is_empty());
    assert!(!accept_suggestion(&mut jack, "personality", "supportive"));
    assert_eq!(jack.personality.as_deref(), Some("grumpy"));
}

#[test]
fn recorded_exchanges_reach_the_next_chat_request() {
    let (ex, mock) = extractor(Vec::new());
    let mut c = Character::new("jack", Role::Npc, "Jack");
    let first = ex.simulate_chat(&c, "Hello!", &[]);
    assert!(!first.withheld);
    record_exchange(&mut c, "Hello!", "Hey there, edited by the author.");
    ex.simulate_chat(&c, "How are you?", &[]);
    let last = mock.calls().into_iter().rev().find(|c| c.template_id == TemplateId::CharChat).unwrap();
    assert!(last.prompt.contains("Hey there, edited by the author."));
}

#[test]
fn withheld_chat_becomes_the_refusal_line() {
    let (ex, _) = extractor_with(MockScript { denylist: vec!["knife fight".into()], ..MockScript::default() });
    let r = ex.simulate_chat(&Character::new("jack", Role::Npc, "Jack"), "Want a knife fight?", &[]);
    assert_eq!((r.text.as_str(), r.withheld), (REFUSAL_LINE, true));
}

#[test]
fn stages_cannot_be_skipped() {
    let (ex, _) = kelly_extractor();
    let mut s = ex.start(KELLY.trim()).unwrap();
    let stage_err = |r: Result<(), ExtractError>| matches!(r, Err(ExtractError::StageViolation { .. }));
    assert!(stage_err(ex.update_environment(&mut s, &[]).map(|_| ())));
    assert!(stage_err(s.confirm(Stage::ObjectsPending)));
    assert!(stage_err(s.update_character(&CharacterId::new("jack"), &CharacterPatch::default())));
    assert!(stage_err(s.update_events(&[])));
    assert_eq!(s.stage, Stage::RoomsPending);
    ex.confirm_rooms(&mut s, None, &BTreeMap::new()).unwrap();
    assert!(stage_err(ex.confirm_rooms(&mut s, None, &BTreeMap::new())));
    assert!(stage_err(s.confirm(Stage::CharactersPending)));
    s.confirm(Stage::ObjectsPending).unwrap();
    assert_eq!(s.stage, Stage::CharactersPending);
}

#[test]
fn author_room_rename_persists() {
    let (ex, _) = kelly_extractor();
    let mut s = ex.start(KELLY.trim()).unwrap();
    let dining = s.draft.environment.rooms.iter().find(|r| r.label == "dining").unwrap().id.clone();
    ex.confirm_rooms(&mut s, None, &BTreeMap::from([(dining.clone(), "living room".to_string())])).unwrap();
    assert_eq!(s.draft.environment.room(&dining).unwrap().label, "living room");
}
