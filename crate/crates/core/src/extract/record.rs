//! Structured extraction targets.
//!
//! JSON keys follow the extraction prompts (`basicInfo`, `personalEmail`,
//! `workExperience`, ...). Absent values are empty strings, never missing
//! keys.

use serde::{Deserialize, Serialize};

use crate::doc_model::LineRange;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct BasicInfo {
    pub name: String,
    pub personal_email: String,
    pub phone_number: String,
    pub age: String,
    pub born: String,
    pub gender: String,
    pub job_intention: String,
    pub current_location: String,
    pub place_of_origin: String,
    pub desired_location: Vec<String>,
}

impl BasicInfo {
    /// Scalar fields as `(json_key, value)` pairs, in schema order.
    pub fn scalar_fields(&self) -> [(&'static str, &str); 9] {
        [
            ("name", &self.name),
            ("personalEmail", &self.personal_email),
            ("phoneNumber", &self.phone_number),
            ("age", &self.age),
            ("born", &self.born),
            ("gender", &self.gender),
            ("jobIntention", &self.job_intention),
            ("currentLocation", &self.current_location),
            ("placeOfOrigin", &self.place_of_origin),
        ]
    }

    pub fn scalar_field_mut(&mut self, key: &str) -> Option<&mut String> {
        Some(match key {
            "name" => &mut self.name,
            "personalEmail" => &mut self.personal_email,
            "phoneNumber" => &mut self.phone_number,
            "age" => &mut self.age,
            "born" => &mut self.born,
            "gender" => &mut self.gender,
            "jobIntention" => &mut self.job_intention,
            "currentLocation" => &mut self.current_location,
            "placeOfOrigin" => &mut self.place_of_origin,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct EducationEntry {
    pub school: String,
    pub major: String,
    pub degree: String,
    pub start_date: String,
    pub end_date: String,
    pub location: String,
}

impl EducationEntry {
    pub fn fields(&self) -> [(&'static str, &str); 6] {
        [
            ("school", &self.school),
            ("major", &self.major),
            ("degree", &self.degree),
            ("startDate", &self.start_date),
            ("endDate", &self.end_date),
            ("location", &self.location),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct WorkEntry {
    pub company: String,
    pub position: String,
    pub start_date: String,
    pub end_date: String,
    pub location: String,
    pub description: String,
    /// Source lines the description was taken from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description_range: Option<LineRange>,
}

impl WorkEntry {
    pub fn fields(&self) -> [(&'static str, &str); 6] {
        [
            ("company", &self.company),
            ("position", &self.position),
            ("startDate", &self.start_date),
            ("endDate", &self.end_date),
            ("location", &self.location),
            ("description", &self.description),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ResumeRecord {
    #[serde(rename = "basicInfo")]
    pub basic: BasicInfo,
    pub education: Vec<EducationEntry>,
    #[serde(rename = "workExperience")]
    pub work: Vec<WorkEntry>,
}
