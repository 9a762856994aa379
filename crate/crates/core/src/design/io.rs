// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    BBox, C4Array, CellInstance, Design, DesignConfig, DesignError, GeneratorConfig, GeneratorFile,
    LayerSpec, RoutingCapMap,
};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignFile {
    schema_version: String,
    die: BBox,
    config: DesignConfig,
    layers: Vec<LayerSpec>,
    c4: C4Array,
    cells: Vec<CellInstance>,
    cap_map: RoutingCapMap,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: Option<String>,
}

fn check_version(text: &str) -> Result<(), DesignError> {
    let probe: VersionProbe =
        serde_json::from_str(text).map_err(|e| DesignError::Parse(e.to_string()))?;
    match probe.schema_version {
        Some(v) if v == SCHEMA_VERSION => Ok(()),
        Some(v) => Err(DesignError::SchemaVersionMismatch {
            expected: SCHEMA_VERSION.to_string(),
            found: v,
        }),
        None => Err(DesignError::Parse("missing field `schema_version`".into())),
    }
}

pub fn parse_design(text: &str) -> Result<Design, DesignError> {
    check_version(text)?;
    let f: DesignFile =
        serde_json::from_str(text).map_err(|e| DesignError::Parse(e.to_string()))?;
    Ok(Design {
        die: f.die,
        config: f.config,
        layers: f.layers,
        c4: f.c4,
        cells: f.cells,
        cap_map: f.cap_map,
    })
}

pub fn serialize_design(design: &Design) -> String {
    let f = DesignFile {
        schema_version: SCHEMA_VERSION.to_string(),
        die: design.die,
        config: design.config.clone(),
        layers: design.layers.clone(),
        c4: design.c4.clone(),
        cells: design.cells.clone(),
        cap_map: design.cap_map.clone(),
    };
    let mut s = serde_json::to_string_pretty(&f).expect("design serializes");
    s.push('\n');
    s
}

/// Content-derived identifier: the first 12 hex digits of the SHA-256 of the
/// serialized design.
pub fn design_id(design: &Design) -> String {
    let digest = Sha256::digest(serialize_design(design).as_bytes());
    format!("d{}", &hex::encode(digest)[..12])
}

pub fn parse_generator_config(text: &str) -> Result<GeneratorConfig, DesignError> {
    check_version(text)?;
    let f: GeneratorFile =
        serde_json::from_str(text).map_err(|e| DesignError::Parse(e.to_string()))?;
    Ok(f.generator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{generate_design, validate_design, ViolationCode};

    fn small() -> Design {
        let cfg = GeneratorConfig {
            die_width: 80.0,
            die_height: 80.0,
            ..GeneratorConfig::default()
        };
        generate_design(&cfg, 3).unwrap()
    }

    #[test]
    fn round_trip_generated() {
        let d = small();
        let text = serialize_design(&d);
        assert_eq!(parse_design(&text).unwrap(), d);
    }

    #[test]
    fn missing_layers_names_field() {
        let d = small();
        let mut v: serde_json::Value = serde_json::from_str(&serialize_design(&d)).unwrap();
        v.as_object_mut().unwrap().remove("layers");
        let err = parse_design(&v.to_string()).unwrap_err();
        assert_eq!(err.code(), "PARSE_ERROR");
        assert!(err.to_string().contains("layers"), "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let d = small();
        let mut v: serde_json::Value = serde_json::from_str(&serialize_design(&d)).unwrap();
        v.as_object_mut()
            .unwrap()
            .insert("extra".into(), serde_json::json!(1));
        let err = parse_design(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn schema_version_mismatch() {
        let d = small();
        let text = serialize_design(&d).replacen("\"schema_version\": \"1\"", "\"schema_version\": \"2\"", 1);
        assert!(matches!(
            parse_design(&text),
            Err(DesignError::SchemaVersionMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let d = small();
        let text = serialize_design(&d).replacen("\"tile_size\": 5.0", "\"tile_size\": NaN", 1);
        assert_eq!(parse_design(&text).unwrap_err().code(), "PARSE_ERROR");
    }

    #[test]
    fn layer_gap_surfaces_after_parse() {
        let d = small();
        let mut v: serde_json::Value = serde_json::from_str(&serialize_design(&d)).unwrap();
        let layers = v["layers"].as_array_mut().unwrap();
        layers.truncate(2);
        layers[1]["index"] = serde_json::json!(3);
        let parsed = parse_design(&v.to_string()).unwrap();
        let codes: Vec<_> = validate_design(&parsed).into_iter().map(|v| v.code).collect();
        assert!(codes.contains(&ViolationCode::LayerIndexGap), "{codes:?}");
    }

    #[test]
    fn design_id_is_stable() {
        let d = small();
        assert_eq!(design_id(&d), design_id(&d.clone()));
        assert_eq!(design_id(&d).len(), 13);
    }
}
