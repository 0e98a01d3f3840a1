use gesture_cell::net::{featurize, Normalization};
use gesture_cell::radar::{Detection, FrameDetections};
use gesture_cell::segmenter::{Mode, Segmenter, SegmenterConfig};
use proptest::prelude::*;

fn frame(i: u64, n: usize) -> FrameDetections {
    let detections = (0..n)
        .map(|k| Detection { peak: 100.0 - k as f64, range: 0.2 + 0.01 * i as f64, doppler: 0.1, x: 0.0, y: 0.3 })
        .collect();
    FrameDetections { frame_index: i, detections }
}

fn run(frames: &[FrameDetections]) -> (Segmenter, Vec<gesture_cell::segmenter::Segment>) {
    let mut s = Segmenter::new(SegmenterConfig::default(), Normalization::identity()).unwrap();
    let out = frames.iter().filter_map(|f| s.push_frame(f.clone())).collect();
    (s, out)
}

/// Window search over the whole stream: find three active frames in a row,
/// walk forward until five quiet frames or fifty total, skip the refractory
/// span and repeat. Returns stream positions `(first, last)`.
fn reference(active: &[bool], cfg: &SegmenterConfig) -> Vec<(usize, usize)> {
    let n = active.len();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < n {
        let Some(s) = (i..n).find(|&s| s + cfg.start_frames <= n && active[s..s + cfg.start_frames].iter().all(|a| *a))
        else {
            break;
        };
        let mut quiet = 0;
        let mut j = s + cfg.start_frames - 1;
        loop {
            if quiet == cfg.end_frames || j + 1 - s == cfg.max_frames {
                out.push((s, j));
                i = j + 1 + cfg.refractory_frames;
                continue 'outer;
            }
            j += 1;
            if j >= n {
                break 'outer;
            }
            quiet = if active[j] { 0 } else { quiet + 1 };
        }
    }
    out
}

#[test]
fn three_active_five_inactive_gives_one_window() {
    let frames: Vec<_> = (0..8).map(|i| frame(i, if i < 3 { 3 } else { 0 })).collect();
    let (s, out) = run(&frames);
    assert_eq!(out.len(), 1);
    assert_eq!((out[0].first_frame, out[0].last_frame), (0, 7));
    assert_eq!(out[0].features, featurize(&frames, &Normalization::identity()));
    assert_eq!(s.mode(), Mode::Refractory);
}

#[test]
fn sixty_active_frames_cap_at_fifty_then_restart_after_refractory() {
    let frames: Vec<_> = (0..70).map(|i| frame(i, 5)).collect();
    let mut s = Segmenter::new(SegmenterConfig::default(), Normalization::identity()).unwrap();
    let mut emitted_at = Vec::new();
    for f in &frames {
        if let Some(seg) = s.push_frame(f.clone()) {
            emitted_at.push((f.frame_index, seg.frames, seg.first_frame));
        }
        if f.frame_index == 59 {
            assert_eq!(emitted_at, vec![(49, 50, 0)]);
            assert_eq!(s.mode(), Mode::Idle);
        }
        if (50..60).contains(&f.frame_index) {
            assert_eq!(s.buffered(), 0);
        }
    }
    assert_eq!(s.mode(), Mode::Active);
    assert_eq!(s.buffered(), 10);
}

#[test]
fn short_bursts_never_open_a_window() {
    let frames: Vec<_> = (0..300).map(|i| frame(i, if i % 3 == 2 { 0 } else { 4 })).collect();
    let (s, out) = run(&frames);
    assert!(out.is_empty());
    assert_eq!((s.mode(), s.buffered()), (Mode::Idle, 0));
}

#[test]
fn idle_means_empty_buffer() {
    let frames: Vec<_> = (0..2).map(|i| frame(i, 4)).collect();
    let mut s = Segmenter::new(SegmenterConfig::default(), Normalization::identity()).unwrap();
    for f in frames {
        s.push_frame(f);
        assert_eq!((s.mode(), s.buffered()), (Mode::Idle, 0));
    }
}

#[test]
fn duplicates_and_regressions_are_dropped() {
    let mut s = Segmenter::new(SegmenterConfig::default(), Normalization::identity()).unwrap();
    for i in [0, 1, 1, 0, 2] {
        s.push_frame(frame(i, 4));
    }
    assert_eq!(s.dropped(), 2);
    assert_eq!(s.mode(), Mode::Active);
}

fn stream() -> impl Strategy<Value = Vec<(u64, usize)>> {
    // (index step, detection count); step 0 repeats the previous index
    prop::collection::vec((0u64..3, prop_oneof![3 => 0usize..2, 5 => 2usize..8]), 0..400).prop_map(|v| {
        let mut idx = 0u64;
        v.into_iter()
            .map(|(step, n)| {
                idx += step;
                (idx, n)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn matches_reference_windows(raw in stream()) {
        let cfg = SegmenterConfig::default();
        let frames: Vec<_> = raw.iter().map(|(i, n)| frame(*i, *n)).collect();

        // keep frames whose index exceeds every earlier one
        let mut accepted = Vec::new();
        let mut last: Option<u64> = None;
        for f in &frames {
            if last.is_none_or(|l| f.frame_index > l) {
                last = Some(f.frame_index);
                accepted.push(f.clone());
            }
        }
        let active: Vec<bool> = accepted.iter().map(|f| f.len() >= cfg.activity_min_detections).collect();
        let expected = reference(&active, &cfg);

        let (s, out) = run(&frames);
        prop_assert_eq!(s.dropped() as usize, frames.len() - accepted.len());
        prop_assert_eq!(out.len(), expected.len());
        for (seg, (a, b)) in out.iter().zip(&expected) {
            prop_assert_eq!(seg.first_frame, accepted[*a].frame_index);
            prop_assert_eq!(seg.last_frame, accepted[*b].frame_index);
            prop_assert_eq!(seg.frames, b - a + 1);
            prop_assert!(seg.frames <= cfg.max_frames);
            prop_assert_eq!(&seg.features, &featurize(&accepted[*a..=*b], &Normalization::identity()));
        }
        for w in expected.windows(2) {
            prop_assert!(w[1].0 > w[0].1 + cfg.refractory_frames);
        }
    }
}
