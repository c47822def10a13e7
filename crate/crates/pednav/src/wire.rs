//! Messages exchanged with the operator console.
//!
//! Every message is one JSON object: `{"type": ..., "seq": n, "payload": ...}`.
//! Over plain TCP each object sits on its own line; over WebSocket each is
//! one text frame. Floats are written with shortest round-trip formatting
//! and parsed back exactly.

use pednav::geom::Point;
use pednav::navigate::{AlertEdge, NavState};
use pednav::synth::Truth;
use serde::{Deserialize, Serialize};

/// Server to console.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    /// Per-connection counter, starting at 1. Gaps mean dropped STATE messages.
    pub seq: u64,
    #[serde(flatten)]
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Body {
    State(StatePayload),
    Alert(AlertPayload),
    Registration(RegistrationPayload),
    CommandAck(CommandAck),
}

impl Body {
    pub fn type_name(&self) -> &'static str {
        match self {
            Body::State(_) => "STATE",
            Body::Alert(_) => "ALERT",
            Body::Registration(_) => "REGISTRATION",
            Body::CommandAck(_) => "COMMAND_ACK",
        }
    }

    /// Only STATE messages may be dropped under backpressure.
    pub fn droppable(&self) -> bool {
        matches!(self, Body::State(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePayload {
    /// Index of the frame in the input sequence or live script.
    pub source_frame: usize,
    pub width: usize,
    pub height: usize,
    pub state: NavState,
    /// Ground truth of the frame; present in live-synth mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthRecord>,
    /// The frame itself as base64 binary PGM, when frame streaming is on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertPayload {
    pub frame_index: usize,
    pub edge: AlertEdge,
    pub depth: Option<f64>,
    pub radial_clearance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationPayload {
    /// Marked needle tips, px; unmarked slots are null.
    pub needles: [Option<Point>; 3],
    /// Alignment residual, cm, once all three needles are marked.
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub finalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandAck {
    pub ok: bool,
    /// The command as applied; absent when it could not be parsed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    /// Client-supplied sequence number of the command, echoed back.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_seq: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Accumulated steering offset after a steer command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steer_total: Option<SteerOffset>,
    pub paused: bool,
}

/// Ground truth of one live-synth frame. Positions in world cm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub frame: usize,
    pub centroid: Point,
    pub axis_deg: f64,
    pub centroid_px: Point,
    pub tip: Point,
    pub depth_cm: f64,
    pub radial_cm: f64,
    pub inside: bool,
    pub violation: bool,
}

impl From<&Truth> for TruthRecord {
    fn from(t: &Truth) -> Self {
        Self {
            frame: t.frame,
            centroid: t.pose.centroid,
            axis_deg: t.pose.axis_deg,
            centroid_px: t.centroid_px,
            tip: t.tip,
            depth_cm: t.depth_cm,
            radial_cm: t.radial_cm,
            inside: t.inside,
            violation: t.violation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SteerOffset {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

/// Console to server: `{"type": "COMMAND", "seq": n, "payload": {"command": ...}}`.
/// `seq` is optional and only echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClientMessage {
    Command {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
        payload: Command,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    /// Moves the simulated drill: world cm and degrees.
    Steer {
        #[serde(default)]
        dx: f64,
        #[serde(default)]
        dy: f64,
        #[serde(default)]
        dtheta: f64,
    },
    /// Marks needle `index` (0 to 2) at an image position, px.
    MarkNeedle {
        index: usize,
        x: f64,
        y: f64,
    },
    FinalizeRegistration,
    Pause,
    Resume,
}

impl WireMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire messages always serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Parses one command line. On failure returns whatever `seq` could be
/// recovered alongside the reason.
pub fn parse_command(text: &str) -> Result<(Option<u64>, Command), (Option<u64>, String)> {
    match serde_json::from_str::<ClientMessage>(text) {
        Ok(ClientMessage::Command { seq, payload }) => Ok((seq, payload)),
        Err(e) => {
            let seq = serde_json::from_str::<serde_json::Value>(text)
                .ok()
                .and_then(|v| v.get("seq").and_then(|s| s.as_u64()));
            Err((seq, e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pednav::matcher::{Match, Pose};
    use pednav::navigate::{OverlayKind, OverlayPrimitive, Track};
    use pednav::plangeo::DrillLine;
    use proptest::prelude::*;

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            any::<f64>().prop_filter("finite", |v| v.is_finite()),
            -1e3..1e3f64,
            Just(0.0),
            Just(-0.0),
            Just(f64::MIN_POSITIVE),
            Just(5e-324),
        ]
    }

    fn point() -> impl Strategy<Value = Point> {
        (finite(), finite()).prop_map(|(x, y)| Point::new(x, y))
    }

    fn nav_state() -> impl Strategy<Value = NavState> {
        let m = (
            (point(), finite(), finite(), finite(), finite()),
            (finite(), finite(), 0..500usize, point(), finite()),
        )
            .prop_map(
                |((c, angle, score, target_score, fit_error), (mc, tc, n_common, t, a))| Match {
                    centroid: c,
                    angle,
                    score,
                    target_score,
                    fit_error,
                    model_coverage: mc,
                    target_coverage: tc,
                    n_common,
                    pose: Pose {
                        translation: t,
                        angle_deg: a,
                    },
                },
            );
        (
            0..10_000usize,
            proptest::option::of(m),
            proptest::option::of((point(), point()).prop_map(|(point, direction)| DrillLine { point, direction })),
            proptest::option::of(finite()),
            proptest::option::of(finite()),
            any::<bool>(),
            prop_oneof![
                Just(None),
                Just(Some(AlertEdge::Raised)),
                Just(Some(AlertEdge::Cleared))
            ],
            prop_oneof![Just(Track::Tracking), Just(Track::Lost), Just(Track::Unregistered)],
            finite(),
            proptest::collection::vec(point(), 0..5),
        )
            .prop_map(
                |(i, matched, line, depth, rc, violation, alert, track, t, geometry)| NavState {
                    frame_index: i,
                    matched,
                    drill_line: line,
                    depth,
                    radial_clearance: rc,
                    violation,
                    alert,
                    track,
                    search_time: t,
                    overlay: vec![OverlayPrimitive {
                        kind: OverlayKind::DrillLine,
                        geometry,
                        style: "drill".into(),
                    }],
                },
            )
    }

    fn command() -> impl Strategy<Value = Command> {
        prop_oneof![
            (finite(), finite(), finite()).prop_map(|(dx, dy, dtheta)| Command::Steer { dx, dy, dtheta }),
            (0..3usize, finite(), finite()).prop_map(|(index, x, y)| Command::MarkNeedle { index, x, y }),
            Just(Command::FinalizeRegistration),
            Just(Command::Pause),
            Just(Command::Resume),
        ]
    }

    fn body() -> impl Strategy<Value = Body> {
        prop_oneof![
            (nav_state(), any::<bool>(), point(), finite()).prop_map(|(state, with_truth, p, v)| {
                Body::State(StatePayload {
                    source_frame: state.frame_index,
                    width: 640,
                    height: 480,
                    truth: with_truth.then_some(TruthRecord {
                        frame: 3,
                        centroid: p,
                        axis_deg: v,
                        centroid_px: p,
                        tip: p,
                        depth_cm: v,
                        radial_cm: v,
                        inside: true,
                        violation: false,
                    }),
                    image: None,
                    state,
                })
            }),
            (proptest::option::of(finite()), finite(), any::<bool>()).prop_map(|(d, r, raised)| {
                Body::Alert(AlertPayload {
                    frame_index: 7,
                    edge: if raised { AlertEdge::Raised } else { AlertEdge::Cleared },
                    depth: d,
                    radial_clearance: Some(r),
                })
            }),
            (
                proptest::option::of(point()),
                point(),
                proptest::option::of(finite()),
                finite(),
                any::<bool>()
            )
                .prop_map(|(a, b, residual, tolerance, finalized)| {
                    Body::Registration(RegistrationPayload {
                        needles: [a, Some(b), None],
                        residual,
                        tolerance,
                        finalized,
                    })
                }),
            (
                any::<bool>(),
                proptest::option::of(command()),
                proptest::option::of(any::<u64>()),
                finite()
            )
                .prop_map(|(ok, command, client_seq, v)| {
                    Body::CommandAck(CommandAck {
                        ok,
                        command,
                        client_seq,
                        error: (!ok).then(|| "bad \"input\"\n".into()),
                        steer_total: Some(SteerOffset {
                            dx: v,
                            dy: -v,
                            dtheta: 0.1,
                        }),
                        paused: ok,
                    })
                }),
        ]
    }

    proptest! {
        #[test]
        fn wire_round_trip_is_lossless(seq in any::<u64>(), body in body()) {
            let msg = WireMessage { seq, body };
            let text = msg.to_json();
            prop_assert!(!text.contains('\n'));
            let back = WireMessage::from_json(&text).unwrap();
            // bitwise, so -0.0 and 0.0 are told apart
            prop_assert_eq!(format!("{back:?}"), format!("{msg:?}"));
            prop_assert_eq!(back, msg);
        }

        #[test]
        fn command_round_trip(seq in proptest::option::of(any::<u64>()), payload in command()) {
            let text = serde_json::to_string(&ClientMessage::Command { seq, payload }).unwrap();
            prop_assert_eq!(parse_command(&text), Ok((seq, payload)));
        }
    }

    #[test]
    fn message_shape() {
        let msg = WireMessage {
            seq: 4,
            body: Body::CommandAck(CommandAck {
                ok: true,
                command: Some(Command::Pause),
                client_seq: None,
                error: None,
                steer_total: None,
                paused: true,
            }),
        };
        let v: serde_json::Value = serde_json::from_str(&msg.to_json()).unwrap();
        assert_eq!(v["type"], "COMMAND_ACK");
        assert_eq!(v["seq"], 4);
        assert_eq!(v["payload"]["command"]["command"], "pause");
    }

    #[test]
    fn commands_parse_from_console_text() {
        let steer = r#"{"type":"COMMAND","seq":9,"payload":{"command":"steer","dx":0.05}}"#;
        assert_eq!(
            parse_command(steer),
            Ok((
                Some(9),
                Command::Steer {
                    dx: 0.05,
                    dy: 0.0,
                    dtheta: 0.0
                }
            ))
        );
        let mark = r#"{"type":"COMMAND","payload":{"command":"mark-needle","index":1,"x":320.5,"y":261}}"#;
        assert_eq!(
            parse_command(mark),
            Ok((
                None,
                Command::MarkNeedle {
                    index: 1,
                    x: 320.5,
                    y: 261.0
                }
            ))
        );
        let fin = r#"{"type":"COMMAND","payload":{"command":"finalize-registration"}}"#;
        assert_eq!(parse_command(fin), Ok((None, Command::FinalizeRegistration)));
    }

    #[test]
    fn malformed_commands_keep_their_seq() {
        for (text, seq) in [
            (r#"{"type":"COMMAND","seq":3,"payload":{"command":"fly"}}"#, Some(3)),
            (r#"{"type":"COMMAND","payload":{"command":"steer","dx":"left"}}"#, None),
            (r#"{"type":"STATE","seq":1,"payload":{}}"#, Some(1)),
            ("not json", None),
        ] {
            let (s, err) = parse_command(text).unwrap_err();
            assert_eq!(s, seq);
            assert!(!err.is_empty());
        }
    }
}
