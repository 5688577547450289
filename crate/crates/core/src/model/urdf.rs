use std::fmt::Write;

use nalgebra::{Matrix3, Vector3};
use roxmltree::{Document, Node};

use super::{Inertial, JointDescription, JointKind, LinkDescription, RobotDescription, RobotModel};
use crate::error::{Error, Result};
use crate::spatial::Pose;

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedDescription(msg.into())
}

fn required<'a>(node: Node<'a, '_>, attr: &str) -> Result<&'a str> {
    node.attribute(attr)
        .ok_or_else(|| malformed(format!("<{}> is missing attribute `{attr}`", node.tag_name().name())))
}

fn parse_f64(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| malformed(format!("{what}: `{text}` is not a finite number")))
}

fn parse_vec3(text: &str, what: &str) -> Result<Vector3<f64>> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(malformed(format!("{what}: expected three numbers, got `{text}`")));
    }
    Ok(Vector3::new(
        parse_f64(parts[0], what)?,
        parse_f64(parts[1], what)?,
        parse_f64(parts[2], what)?,
    ))
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.has_tag_name(tag))
}

fn parse_origin(parent: Node) -> Result<Pose> {
    match child(parent, "origin") {
        None => Ok(Pose::identity()),
        Some(o) => {
            let xyz = o.attribute("xyz").map(|t| parse_vec3(t, "origin xyz")).transpose()?;
            let rpy = o.attribute("rpy").map(|t| parse_vec3(t, "origin rpy")).transpose()?;
            Ok(Pose::from_xyz_rpy(
                xyz.unwrap_or_else(Vector3::zeros),
                rpy.unwrap_or_else(Vector3::zeros),
            ))
        }
    }
}

fn parse_bool(text: &str, what: &str) -> Result<bool> {
    match text {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(malformed(format!("{what}: expected true or false, got `{text}`"))),
    }
}

fn warn_ignored(node: Node, known: &[&str]) {
    for c in node.children().filter(|c| c.is_element()) {
        let tag = c.tag_name().name();
        if !known.contains(&tag) {
            log::warn!("ignoring <{tag}> inside <{}>", node.tag_name().name());
        }
    }
}

fn parse_link(node: Node) -> Result<LinkDescription> {
    let name = required(node, "name")?.to_string();
    warn_ignored(node, &["inertial"]);
    let inertial = match child(node, "inertial") {
        None => None,
        Some(inode) => {
            let invalid = |reason: String| Error::InvalidInertia {
                link: name.clone(),
                reason,
            };
            let mass_node = child(inode, "mass").ok_or_else(|| invalid("missing <mass>".into()))?;
            let mass = parse_f64(required(mass_node, "value")?, "mass").map_err(|e| invalid(e.to_string()))?;
            let inode_i = child(inode, "inertia").ok_or_else(|| invalid("missing <inertia>".into()))?;
            let get = |attr: &str| -> Result<f64> {
                let text = inode_i.attribute(attr).ok_or_else(|| invalid(format!("missing `{attr}`")))?;
                parse_f64(text, attr).map_err(|e| invalid(e.to_string()))
            };
            let (ixx, ixy, ixz) = (get("ixx")?, get("ixy")?, get("ixz")?);
            let (iyy, iyz, izz) = (get("iyy")?, get("iyz")?, get("izz")?);
            Some(Inertial {
                origin: parse_origin(inode)?,
                mass,
                inertia: Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz),
            })
        }
    };
    Ok(LinkDescription { name, inertial })
}

fn parse_joint(node: Node) -> Result<JointDescription> {
    let name = required(node, "name")?.to_string();
    let is_loop = node.attribute("loop").map(|t| parse_bool(t, "loop")).transpose()?.unwrap_or(false);
    let kind = match (required(node, "type")?, is_loop) {
        ("revolute" | "continuous", false) => JointKind::Revolute,
        ("revolute" | "continuous", true) => JointKind::LoopRevolute,
        ("fixed", false) => JointKind::Fixed,
        (other, _) => {
            return Err(malformed(format!("joint `{name}` has unsupported type `{other}`")));
        }
    };
    warn_ignored(node, &["parent", "child", "origin", "axis"]);
    let link_of = |tag: &str| -> Result<String> {
        let n = child(node, tag).ok_or_else(|| malformed(format!("joint `{name}` has no <{tag}>")))?;
        Ok(required(n, "link")?.to_string())
    };
    let axis = match child(node, "axis") {
        Some(a) => parse_vec3(required(a, "xyz")?, "axis xyz")?,
        None => Vector3::x(),
    };
    Ok(JointDescription {
        parent: link_of("parent")?,
        child: link_of("child")?,
        origin: parse_origin(node)?,
        axis,
        actuated: node.attribute("actuated").map(|t| parse_bool(t, "actuated")).transpose()?,
        kind,
        name,
    })
}

/// Parses a URDF document. Supported joint types are revolute, continuous
/// (treated as revolute) and fixed; `loop="true"` marks a loop-closure joint.
/// Other tags are skipped with a warning.
pub fn parse_urdf(text: &str) -> Result<RobotModel> {
    let doc = Document::parse(text).map_err(|e| malformed(format!("invalid XML: {e}")))?;
    let root = doc.root_element();
    if !root.has_tag_name("robot") {
        return Err(malformed(format!("root element is <{}>, expected <robot>", root.tag_name().name())));
    }
    let mut desc = RobotDescription {
        name: root.attribute("name").unwrap_or("robot").to_string(),
        links: Vec::new(),
        joints: Vec::new(),
        tool: None,
    };
    for node in root.children().filter(|c| c.is_element()) {
        match node.tag_name().name() {
            "link" => desc.links.push(parse_link(node)?),
            "joint" => desc.joints.push(parse_joint(node)?),
            "tool" => desc.tool = Some(required(node, "link")?.to_string()),
            other => log::warn!("ignoring <{other}>"),
        }
    }
    if desc.links.is_empty() {
        return Err(malformed("robot has no links"));
    }
    RobotModel::from_description(&desc)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn vec3(v: &Vector3<f64>) -> String {
    format!("{} {} {}", v.x, v.y, v.z)
}

fn origin_tag(p: &Pose) -> String {
    format!("<origin xyz=\"{}\" rpy=\"{}\"/>", vec3(p.translation()), vec3(&p.rpy()))
}

pub(super) fn write_urdf(desc: &RobotDescription) -> String {
    let mut out = String::from("<?xml version=\"1.0\"?>\n");
    let _ = writeln!(out, "<robot name=\"{}\">", escape(&desc.name));
    for l in &desc.links {
        match &l.inertial {
            None => {
                let _ = writeln!(out, "  <link name=\"{}\"/>", escape(&l.name));
            }
            Some(i) => {
                let m = &i.inertia;
                let _ = writeln!(out, "  <link name=\"{}\">", escape(&l.name));
                let _ = writeln!(out, "    <inertial>");
                let _ = writeln!(out, "      {}", origin_tag(&i.origin));
                let _ = writeln!(out, "      <mass value=\"{}\"/>", i.mass);
                let _ = writeln!(
                    out,
                    "      <inertia ixx=\"{}\" ixy=\"{}\" ixz=\"{}\" iyy=\"{}\" iyz=\"{}\" izz=\"{}\"/>",
                    m[(0, 0)],
                    m[(0, 1)],
                    m[(0, 2)],
                    m[(1, 1)],
                    m[(1, 2)],
                    m[(2, 2)]
                );
                let _ = writeln!(out, "    </inertial>");
                let _ = writeln!(out, "  </link>");
            }
        }
    }
    for j in &desc.joints {
        let (ty, extra) = match j.kind {
            JointKind::Revolute => ("revolute", ""),
            JointKind::Fixed => ("fixed", ""),
            JointKind::LoopRevolute => ("revolute", " loop=\"true\""),
        };
        let actuated = j.actuated.map(|a| format!(" actuated=\"{a}\"")).unwrap_or_default();
        let _ = writeln!(out, "  <joint name=\"{}\" type=\"{ty}\"{extra}{actuated}>", escape(&j.name));
        let _ = writeln!(out, "    <parent link=\"{}\"/>", escape(&j.parent));
        let _ = writeln!(out, "    <child link=\"{}\"/>", escape(&j.child));
        let _ = writeln!(out, "    {}", origin_tag(&j.origin));
        let _ = writeln!(out, "    <axis xyz=\"{}\"/>", vec3(&j.axis));
        let _ = writeln!(out, "  </joint>");
    }
    if let Some(t) = &desc.tool {
        let _ = writeln!(out, "  <tool link=\"{}\"/>", escape(t));
    }
    out.push_str("</robot>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_LINK: &str = r#"<?xml version="1.0"?>
<robot name="two">
  <link name="base"/>
  <link name="upper">
    <inertial>
      <origin xyz="0.5 0 0"/>
      <mass value="2"/>
      <inertia ixx="0.01" ixy="0" ixz="0" iyy="0.2" iyz="0" izz="0.2"/>
    </inertial>
    <visual><geometry><box size="1 0.1 0.1"/></geometry></visual>
  </link>
  <link name="lower">
    <inertial>
      <mass value="1"/>
      <inertia ixx="0.01" ixy="0" ixz="0" iyy="0.1" iyz="0" izz="0.1"/>
    </inertial>
  </link>
  <joint name="shoulder" type="revolute">
    <parent link="base"/>
    <child link="upper"/>
    <axis xyz="0 0 1"/>
    <limit lower="-1" upper="1" effort="1" velocity="1"/>
  </joint>
  <joint name="elbow" type="continuous">
    <parent link="upper"/>
    <child link="lower"/>
    <origin xyz="1 0 0" rpy="0 0 0.3"/>
    <axis xyz="0 0 1"/>
  </joint>
  <gazebo/>
</robot>"#;

    #[test]
    fn parses_two_link_arm() {
        let m = parse_urdf(TWO_LINK).unwrap();
        assert_eq!(m.name(), "two");
        assert_eq!(m.links().len(), 3);
        assert_eq!(m.joints().len(), 2);
        assert_eq!(m.depth(), 2);
        assert_eq!(m.links()[1].inertia.unwrap().mass(), 2.0);
        assert!(m.links()[0].inertia.is_none());
        // elbow: lower COM frame in upper COM frame
        let rest = m.joints()[1].rest_offset;
        assert!((rest.translation() - Vector3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn axis_defaults_to_x() {
        let text = TWO_LINK.replace("<axis xyz=\"0 0 1\"/>\n    <limit", "<limit");
        let m = parse_urdf(&text).unwrap();
        assert_eq!(m.joints()[0].axis_direction, Vector3::x());
    }

    #[test]
    fn rejects_unsupported_joint_type() {
        let text = TWO_LINK.replace("continuous", "prismatic");
        assert!(matches!(parse_urdf(&text), Err(Error::MalformedDescription(_))));
    }

    #[test]
    fn rejects_non_unit_axis() {
        let text = TWO_LINK.replacen("0 0 1", "0 0 2", 1);
        assert!(matches!(parse_urdf(&text), Err(Error::MalformedDescription(_))));
    }

    #[test]
    fn rejects_bad_xml_and_numbers() {
        assert!(matches!(parse_urdf("<robot"), Err(Error::MalformedDescription(_))));
        assert!(matches!(parse_urdf("<model/>"), Err(Error::MalformedDescription(_))));
        let text = TWO_LINK.replace("xyz=\"1 0 0\"", "xyz=\"1 0\"");
        assert!(matches!(parse_urdf(&text), Err(Error::MalformedDescription(_))));
    }

    #[test]
    fn bad_inertia_is_reported_against_link() {
        let text = TWO_LINK.replace("<mass value=\"2\"/>", "<mass value=\"-2\"/>");
        match parse_urdf(&text) {
            Err(Error::InvalidInertia { link, .. }) => assert_eq!(link, "upper"),
            other => panic!("unexpected {other:?}"),
        }
        let text = TWO_LINK.replace("iyy=\"0.2\"", "iyy=\"-0.2\"");
        assert!(matches!(parse_urdf(&text), Err(Error::InvalidInertia { .. })));
    }

    #[test]
    fn unknown_parent_is_graph_error() {
        let text = TWO_LINK.replace("<parent link=\"upper\"/>", "<parent link=\"ghost\"/>");
        assert!(matches!(parse_urdf(&text), Err(Error::GraphError(_))));
    }

    #[test]
    fn write_then_parse_round_trips() {
        let m = parse_urdf(TWO_LINK).unwrap();
        let again = parse_urdf(&m.to_urdf()).unwrap();
        assert!(m.approx_eq(&again, 1e-12));
    }

    #[test]
    fn names_are_escaped() {
        let text = TWO_LINK.replace("name=\"two\"", "name=\"a&amp;b\"");
        let m = parse_urdf(&text).unwrap();
        assert_eq!(m.name(), "a&b");
        assert_eq!(parse_urdf(&m.to_urdf()).unwrap().name(), "a&b");
    }
}
