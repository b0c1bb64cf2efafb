//! A fourth scene added purely from the outside: one runtime, one
//! registration, one command handler.

use gewu_director::{Outbox, RegistryError, SceneDirector, SceneError, SceneRuntime};
use gewu_protocol::{CommandClass, Envelope, Payload};
use gewu_sim::{ControlState, SceneView, SimScene};
use serde_json::Value;

pub const NAME: &str = "Lighthouse";
pub const TOGGLE: &str = "lamp.toggle";

#[derive(Default)]
pub struct Lighthouse {
    on: bool,
    ticks: u64,
    control: ControlState,
}

impl SceneRuntime for Lighthouse {
    fn handle(&mut self, env: &Envelope, out: &mut Outbox) -> Result<(), SceneError> {
        if env.kind != TOGGLE {
            return Err(SceneError::Unsupported {
                scene: NAME.into(),
                kind: env.kind.clone(),
            });
        }
        self.on = env.payload_bool("on").unwrap_or(!self.on);
        let mut p = Payload::new();
        p.insert("on".into(), Value::from(self.on));
        out.emit("lamp.state", p);
        Ok(())
    }
}

impl SimScene for Lighthouse {
    fn name(&self) -> &'static str {
        NAME
    }

    fn step(&mut self, _out: &mut Outbox) {
        self.ticks += 1;
    }

    fn view(&self) -> SceneView {
        SceneView {
            scene: NAME,
            foot: [0.0; 3],
            torso: [0.0, 0.0, 1.0],
            upright: true,
            coins: if self.on { vec![[0.0, 1.2]] } else { Vec::new() },
            lambda: 0.0,
            assist: [0.0; 3],
            terrain: Vec::new(),
        }
    }

    fn control(&self) -> &ControlState {
        &self.control
    }
}

pub fn register(d: &mut SceneDirector<dyn SimScene>) -> Result<(), RegistryError> {
    d.register(NAME, ["light"], Box::new(|| Box::new(Lighthouse::default()) as Box<dyn SimScene>))?;
    d.register_command(TOGGLE, CommandClass::StateIntent)
        .expect("lamp.toggle is a new type");
    Ok(())
}
