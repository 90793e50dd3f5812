use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDateTime, Timelike};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFeatures {
    pub hour: u32,
    pub minute: u32,
    /// Monday = 0
    pub day_of_week: u32,
    pub month: u32,
    pub hour_sin: f64,
    pub hour_cos: f64,
    pub minute_sin: f64,
    pub minute_cos: f64,
    pub dow_sin: f64,
    pub dow_cos: f64,
    pub month_sin: f64,
    pub month_cos: f64,
}

fn cyclic(value: u32, period: f64) -> (f64, f64) {
    let angle = TAU * value as f64 / period;
    (angle.sin(), angle.cos())
}

pub fn time_features(start: &NaiveDateTime) -> TimeFeatures {
    let hour = start.hour();
    let minute = start.minute();
    let day_of_week = start.weekday().num_days_from_monday();
    let month = start.month();
    let (hour_sin, hour_cos) = cyclic(hour, 24.0);
    let (minute_sin, minute_cos) = cyclic(minute, 60.0);
    let (dow_sin, dow_cos) = cyclic(day_of_week, 7.0);
    let (month_sin, month_cos) = cyclic(month, 12.0);
    TimeFeatures {
        hour,
        minute,
        day_of_week,
        month,
        hour_sin,
        hour_cos,
        minute_sin,
        minute_cos,
        dow_sin,
        dow_cos,
        month_sin,
        month_cos,
    }
}
