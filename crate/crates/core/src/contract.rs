//! Robot-acquisition and publish-gating contract.
//!
//! Robots are stored as assets in world state. The contract exposes five
//! chaincode-style functions with positional string arguments:
//!
//! * `setup(json robot list)` — admin-only creation of robot assets
//! * `acquire(robot_id)` — claim an exclusive robot for the caller
//! * `release(robot_id)` — give an exclusive robot back
//! * `authorize(robot_id)` — can the caller publish to this robot?
//! * `set(robot_id, base64 payload)` — authorized publish of one message
//!
//! All state access goes through the transaction's read/write sets, so
//! concurrent-acquire safety is delegated entirely to the ledger's commit
//! validation: two acquires simulated against the same robot version cannot
//! both commit.

use serde::{Deserialize, Serialize};

use crate::identity::{AttributeName, ClientIdentity};
use crate::ledger::{Contract, ContractError, TxContext};

pub const FN_SETUP: &str = "setup";
pub const FN_ACQUIRE: &str = "acquire";
pub const FN_RELEASE: &str = "release";
pub const FN_AUTHORIZE: &str = "authorize";
pub const FN_SET: &str = "set";

/// Rejection message for publishes that fail the authorization gate.
pub const NOT_AUTHORIZED: &str = "Client not authorized!";

/// Publishing policy of a robot's service.
///
/// `Exclusive`: only the single current operator may publish. `Open`: any
/// holder of the required attribute may publish. The enum is deliberately
/// non-exhaustive so k-limited publisher/subscriber modes can be added
/// without breaking policy consumers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[non_exhaustive]
pub enum OperationMode {
    Exclusive,
    Open,
}

/// The per-robot ledger asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotAsset {
    pub name: String,
    pub sub_topic: String,
    pub pub_topic: String,
    /// Current operator's subject id, empty when free. Always empty in
    /// open mode.
    #[serde(default)]
    pub operator: String,
    #[serde(default)]
    pub under_op: bool,
    pub mode: OperationMode,
    pub required_attribute: AttributeName,
}

impl RobotAsset {
    /// The topic this robot's service runs on: the command topic for
    /// robots that are driven, the publish topic for pure publishers.
    pub fn service_topic(&self) -> &str {
        if self.sub_topic.is_empty() {
            &self.pub_topic
        } else {
            &self.sub_topic
        }
    }
}

/// Robot description handed to `setup`; the asset is created free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotDescriptor {
    pub name: String,
    #[serde(default)]
    pub sub_topic: String,
    #[serde(default)]
    pub pub_topic: String,
    pub mode: OperationMode,
    pub required_attribute: AttributeName,
}

impl RobotDescriptor {
    /// Descriptor for a driveable robot with conventional topic names and
    /// the lowercase robot name as its required attribute.
    pub fn mobile(name: &str) -> Result<Self, ContractError> {
        Ok(Self {
            name: name.to_string(),
            sub_topic: format!("/{name}/cmd_vel"),
            pub_topic: format!("/{name}/odom"),
            mode: OperationMode::Exclusive,
            required_attribute: AttributeName::new(name)
                .map_err(|e| ContractError::BadArguments(e.to_string()))?,
        })
    }

    fn into_asset(self) -> RobotAsset {
        RobotAsset {
            name: self.name,
            sub_topic: self.sub_topic,
            pub_topic: self.pub_topic,
            operator: String::new(),
            under_op: false,
            mode: self.mode,
            required_attribute: self.required_attribute,
        }
    }
}

/// World-state key of a robot asset.
pub fn robot_key(robot_id: &str) -> String {
    format!("robot/{robot_id}")
}

/// World-state key prefix of a robot's message stream.
pub fn message_prefix(robot_id: &str) -> String {
    format!("msg/{robot_id}/")
}

/// One published message as stored on the ledger. The sequence number is
/// not a field: it is the suffix of the key the ledger assigned at commit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub publisher: String,
    pub payload_hex: String,
    pub publish_ms: f64,
}

impl MessageRecord {
    pub fn payload(&self) -> Vec<u8> {
        hex::decode(&self.payload_hex).unwrap_or_default()
    }
}

/// The chaincode. `admin_org`/`admin_attribute` gate `setup` and the
/// recovery path of `release`; `enforce_publish_gate` switches between the
/// access-controlled contract and the plain event-driven variant that
/// accepts every publish.
#[derive(Debug, Clone)]
pub struct RobotContract {
    admin_org: String,
    admin_attribute: AttributeName,
    enforce_publish_gate: bool,
}

impl Default for RobotContract {
    fn default() -> Self {
        Self::new()
    }
}

impl RobotContract {
    pub fn new() -> Self {
        Self {
            admin_org: "Org1".to_string(),
            admin_attribute: AttributeName::new("admin").expect("valid attribute"),
            enforce_publish_gate: true,
        }
    }

    /// The event-driven variant: `set` skips the authorization gate.
    pub fn ungated() -> Self {
        Self {
            enforce_publish_gate: false,
            ..Self::new()
        }
    }

    pub fn gated(enforce: bool) -> Self {
        Self {
            enforce_publish_gate: enforce,
            ..Self::new()
        }
    }

    /// Use a different administering organization than the default `Org1`.
    pub fn with_admin_org(mut self, org: &str) -> Self {
        self.admin_org = org.to_string();
        self
    }

    fn is_admin(&self, client: &ClientIdentity) -> bool {
        client.org_id == self.admin_org && client.has_attribute(&self.admin_attribute)
    }

    fn read_robot(&self, ctx: &mut TxContext<'_>, robot_id: &str) -> Result<RobotAsset, ContractError> {
        let bytes = ctx
            .read(&robot_key(robot_id))
            .ok_or_else(|| ContractError::NotFound(format!("robot {robot_id:?}")))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| ContractError::InvalidState(format!("robot {robot_id:?} asset: {e}")))
    }

    fn write_robot(&self, ctx: &mut TxContext<'_>, robot: &RobotAsset) {
        let bytes = serde_json::to_vec(robot).expect("robot asset serializes");
        ctx.put(robot_key(&robot.name), bytes);
    }

    fn setup(&self, ctx: &mut TxContext<'_>, args: &[String]) -> Result<Vec<u8>, ContractError> {
        if !self.is_admin(ctx.client()) {
            return Err(ContractError::Unauthorized(format!(
                "setup requires the {:?} attribute of {}",
                self.admin_attribute.as_str(),
                self.admin_org
            )));
        }
        let [json] = args else {
            return Err(ContractError::BadArguments("setup(json robot list)".into()));
        };
        let descriptors: Vec<RobotDescriptor> = serde_json::from_str(json)
            .map_err(|e| ContractError::BadArguments(format!("robot list: {e}")))?;
        let mut seen = std::collections::BTreeSet::new();
        for descriptor in descriptors {
            if descriptor.name.is_empty() {
                return Err(ContractError::BadArguments("robot name must be non-empty".into()));
            }
            if !seen.insert(descriptor.name.clone()) {
                return Err(ContractError::Conflict(format!(
                    "duplicate robot {:?} in setup",
                    descriptor.name
                )));
            }
            if ctx.read(&robot_key(&descriptor.name)).is_some() {
                return Err(ContractError::Conflict(format!(
                    "robot {:?} already exists",
                    descriptor.name
                )));
            }
            self.write_robot(ctx, &descriptor.into_asset());
        }
        Ok(b"ok".to_vec())
    }

    fn acquire(&self, ctx: &mut TxContext<'_>, args: &[String]) -> Result<Vec<u8>, ContractError> {
        let [robot_id] = args else {
            return Err(ContractError::BadArguments("acquire(robot_id)".into()));
        };
        let mut robot = self.read_robot(ctx, robot_id)?;
        match robot.mode {
            OperationMode::Exclusive => {
                if robot.under_op {
                    return Ok(b"false".to_vec());
                }
                if ctx.client().has_attribute(&robot.required_attribute) {
                    robot.under_op = true;
                    robot.operator = ctx.client().subject_id.clone();
                    self.write_robot(ctx, &robot);
                    Ok(b"true".to_vec())
                } else {
                    Ok(b"false".to_vec())
                }
            }
            // Open services have no exclusivity to claim: report whether
            // the caller could publish, mutate nothing.
            OperationMode::Open => {
                let ok = ctx.client().has_attribute(&robot.required_attribute);
                Ok(if ok { b"true".to_vec() } else { b"false".to_vec() })
            }
        }
    }

    fn release(&self, ctx: &mut TxContext<'_>, args: &[String]) -> Result<Vec<u8>, ContractError> {
        let [robot_id] = args else {
            return Err(ContractError::BadArguments("release(robot_id)".into()));
        };
        let mut robot = self.read_robot(ctx, robot_id)?;
        if !robot.under_op {
            return Err(ContractError::InvalidState(format!(
                "robot {robot_id:?} is not under operation"
            )));
        }
        let client = ctx.client();
        if client.subject_id != robot.operator && !self.is_admin(client) {
            return Err(ContractError::Unauthorized(format!(
                "only the current operator may release robot {robot_id:?}"
            )));
        }
        robot.under_op = false;
        robot.operator.clear();
        self.write_robot(ctx, &robot);
        Ok(b"ok".to_vec())
    }

    fn authorized(&self, client: &ClientIdentity, robot: &RobotAsset) -> bool {
        match robot.mode {
            OperationMode::Exclusive => {
                !robot.operator.is_empty() && client.subject_id == robot.operator
            }
            OperationMode::Open => client.has_attribute(&robot.required_attribute),
        }
    }

    fn authorize(&self, ctx: &mut TxContext<'_>, args: &[String]) -> Result<Vec<u8>, ContractError> {
        let [robot_id] = args else {
            return Err(ContractError::BadArguments("authorize(robot_id)".into()));
        };
        let robot = self.read_robot(ctx, robot_id)?;
        let ok = self.authorized(ctx.client(), &robot);
        Ok(if ok { b"true".to_vec() } else { b"false".to_vec() })
    }

    fn set(&self, ctx: &mut TxContext<'_>, args: &[String]) -> Result<Vec<u8>, ContractError> {
        let [robot_id, payload_b64] = args else {
            return Err(ContractError::BadArguments("set(robot_id, base64 payload)".into()));
        };
        let robot = self.read_robot(ctx, robot_id)?;
        if self.enforce_publish_gate && !self.authorized(ctx.client(), &robot) {
            return Err(ContractError::Unauthorized(NOT_AUTHORIZED.to_string()));
        }
        use base64::Engine as _;
        let payload = base64::engine::general_purpose::STANDARD
            .decode(payload_b64)
            .map_err(|e| ContractError::BadArguments(format!("payload: {e}")))?;
        let record = MessageRecord {
            publisher: ctx.client().subject_id.clone(),
            payload_hex: hex::encode(payload),
            publish_ms: ctx.now_ms(),
        };
        let bytes = serde_json::to_vec(&record).expect("message record serializes");
        ctx.append(message_prefix(robot_id), bytes);
        Ok(b"queued".to_vec())
    }
}

impl Contract for RobotContract {
    fn invoke(
        &self,
        ctx: &mut TxContext<'_>,
        function: &str,
        args: &[String],
    ) -> Result<Vec<u8>, ContractError> {
        match function {
            FN_SETUP => self.setup(ctx, args),
            FN_ACQUIRE => self.acquire(ctx, args),
            FN_RELEASE => self.release(ctx, args),
            FN_AUTHORIZE => self.authorize(ctx, args),
            FN_SET => self.set(ctx, args),
            other => Err(ContractError::UnknownFunction(other.to_string())),
        }
    }
}
