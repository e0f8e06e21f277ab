//! The authoring walkthrough for the Julie/Jack story, end to end against the mock.

mod support;

use std::collections::BTreeMap;
use std::sync::Arc;

use support::*;
use vignette_core::catalog::Catalog;
use vignette_core::extract::{accept_suggestion, record_exchange, CharacterPatch, EnvOp, EventEdit, Extractor, Stage};
use vignette_core::spec::{encode_spec, validate_spec, CharacterId, ObjectId, Role, RoomId};

fn story() -> String {
    std::fs::read_to_string(fixtures().join("kelly/story.txt")).unwrap().trim().to_string()
}

#[test]
fn authoring_walkthrough_produces_the_frozen_spec() {
    let (gateway, _mock) = mock_gateway(kelly_script());
    let ex = Extractor::new(gateway, Arc::new(Catalog::builtin()));

    // step 1: extraction
    let mut s = ex.start(&story()).unwrap();
    assert_eq!(s.stage, Stage::RoomsPending);
    let names: Vec<_> = s.draft.characters.iter().map(|c| (c.name.as_str(), c.role)).collect();
    assert_eq!(names, [("me", Role::Pc), ("Julie", Role::Npc), ("Jack", Role::Npc)]);
    let julie = &s.draft.characters[1];
    assert_eq!(julie.social_role.as_deref(), Some("friend"));
    assert_eq!(julie.mood, None, "mood is not in the story and must stay blank");
    assert!(s.draft.characters.iter().all(|c| c.personality.is_none()));
    assert_eq!(s.draft.environment.layout_id, "residential");
    let dining = s.draft.environment.rooms.iter().find(|r| r.label == "dining").unwrap().id.clone();

    // step 2: relabel and confirm rooms
    let labels = BTreeMap::from([(dining.clone(), "living room".to_string())]);
    ex.confirm_rooms(&mut s, None, &labels).unwrap();
    assert_eq!(s.stage, Stage::ObjectsPending);
    let env = &s.draft.environment;
    assert_eq!(env.rooms.iter().find(|r| r.id == dining).unwrap().label, "living room");
    for asset in ["stove", "guitar", "microphone", "bookshelf", "wardrobe", "sofa", "dining_table", "bed"] {
        assert!(env.objects.iter().any(|o| o.asset_id == asset), "{asset} missing");
    }
    assert_eq!(env.objects.iter().filter(|o| o.asset_id == "bed").count(), 2, "a bed for each bedroom");
    assert_eq!(s.draft.key_events.len(), 3);

    // step 3: remove the carpet in the living room, add a dining chair in the kitchen
    let rug = env.objects.iter().find(|o| o.asset_id == "rug" && o.room_id == dining).expect("living room rug").id.clone();
    ex.update_environment(&mut s, &[EnvOp::Remove { object_id: rug.clone() }]).unwrap();
    assert!(s.draft.environment.object(&rug).is_none());
    let added = ex
        .update_environment(&mut s, &[EnvOp::Add { name: "dining chair".into(), room: Some("kitchen".into()), position: None, facing: None }])
        .unwrap();
    let chair = s.draft.environment.object(&added[0]).unwrap().clone();
    assert_eq!(chair.asset_id, "chair");
    assert!(chair.affords("having dinner"));
    assert_eq!(chair.room_id, RoomId::new("room_1"));
    s.confirm(Stage::ObjectsPending).unwrap();

    // step 4: Jack's persona from a rehearsed conversation
    let jack_id = CharacterId::new("jack");
    let mut jack = s.draft.character(&jack_id).unwrap().clone();
    let reply = ex.simulate_chat(&jack, "I burned the rice again.", &[]);
    assert!(!reply.withheld);
    assert_eq!(reply.text, "Oh no. Want me to order some takeout instead?");
    record_exchange(&mut jack, "I burned the rice again.", "Don't worry, it happens. I'll help you make it again.");
    let suggestions = ex.suggest_persona(&jack);
    assert_eq!(suggestions.get("personality").map(String::as_str), Some("supportive"));
    assert!(accept_suggestion(&mut jack, "personality", "supportive"));
    let patch = CharacterPatch {
        conversation_snippets: Some(jack.conversation_snippets.clone()),
        accept: BTreeMap::from([("personality".to_string(), "supportive".to_string())]),
        sprite_id: Some("sprite.npc.3".into()),
        ..CharacterPatch::default()
    };
    s.update_character(&jack_id, &patch).unwrap();
    assert_eq!(s.draft.character(&jack_id).unwrap().personality.as_deref(), Some("supportive"));
    s.confirm(Stage::CharactersPending).unwrap();

    // step 5: Jack joins dinner
    assert!(s.draft.key_events[1].activity_of(&jack_id).is_none());
    s.update_events(&[EventEdit::AddActivity { event: 1, character_id: jack_id.clone(), action: "having dinner".into(), object_id: Some(chair.id.clone()) }])
        .unwrap();
    s.confirm(Stage::EventsPending).unwrap();
    assert_eq!(s.stage, Stage::Complete);

    let spec = s.draft;
    assert!(validate_spec(&spec).is_empty());
    let e1: Vec<_> = spec.key_events[1].activities.iter().map(|a| a.object_id.clone().unwrap()).collect();
    assert_eq!(e1.len(), 3);
    assert_eq!(e1.iter().collect::<std::collections::BTreeSet<&ObjectId>>().len(), 3, "one seat each");
    let bytes = encode_spec(&spec).unwrap();
    golden(&fixtures().join("kelly/kelly.vignette.json"), std::str::from_utf8(&bytes).unwrap());
}
