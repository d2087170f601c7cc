//! Canonical-serialization round trips and order-invariance of thread
//! assembly, checked over generated archives.

use chrono::{TimeZone, Utc};
use proptest::prelude::*;

use threadgauge::archive::{
    build_threads, parse_archive, write_comments_csv, write_posts_csv, CommentRecord, PostRecord,
};

fn arb_post(idx: usize) -> impl Strategy<Value = PostRecord> {
    ("[a-z0-9 ]{0,12}", "[a-z0-9 ,.!]{0,30}", 0i64..100_000).prop_map(move |(title, body, secs)| {
        PostRecord {
            post_id: format!("p{idx:03}"),
            author_id: format!("a{:02}", idx % 7),
            created_at: Utc.timestamp_opt(1_760_000_000 + secs, 0).unwrap(),
            title,
            body,
        }
    })
}

fn arb_archive() -> impl Strategy<Value = (Vec<PostRecord>, Vec<CommentRecord>)> {
    (1usize..6).prop_flat_map(|n_posts| {
        let posts: Vec<_> = (0..n_posts).map(arb_post).collect();
        let comments = proptest::collection::vec(
            (0..n_posts, "[a-z ,.]{0,24}", 0i64..100_000, 0u8..2),
            0..12,
        );
        (posts, comments).prop_map(|(posts, raw_comments)| {
            let comments: Vec<CommentRecord> = raw_comments
                .into_iter()
                .enumerate()
                .map(|(i, (post, body, secs, top))| CommentRecord {
                    comment_id: format!("c{i:03}"),
                    post_id: format!("p{post:03}"),
                    parent_id: if top == 0 || i == 0 {
                        None
                    } else {
                        // reference an earlier comment in the same post if any
                        Some(format!("c{:03}", i - 1))
                    },
                    author_id: format!("a{:02}", i % 5),
                    created_at: Utc.timestamp_opt(1_760_000_000 + secs, 0).unwrap(),
                    body,
                })
                .collect();
            (posts, comments)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serialize_then_parse_is_identity((posts, comments) in arb_archive()) {
        let mut posts_csv = Vec::new();
        let mut comments_csv = Vec::new();
        write_posts_csv(&mut posts_csv, &posts).unwrap();
        write_comments_csv(&mut comments_csv, &comments).unwrap();
        let parsed = parse_archive(posts_csv.as_slice(), comments_csv.as_slice()).unwrap();

        // canonical order is (created_at, id); compare as sorted sets
        let mut want_posts = posts.clone();
        want_posts.sort_by(|a, b| a.created_at.cmp(&b.created_at).then(a.post_id.cmp(&b.post_id)));
        prop_assert_eq!(&parsed.posts, &want_posts);

        // parent references may be cleared when they do not resolve within
        // the same post; everything else must round-trip exactly
        let mut want_comments = comments.clone();
        want_comments.sort_by(|a, b| a.created_at.cmp(&b.created_at).then(a.comment_id.cmp(&b.comment_id)));
        prop_assert_eq!(parsed.comments.len() + parsed.quarantined.len(), want_comments.len());
        for (got, want) in parsed.comments.iter().zip(&want_comments) {
            prop_assert_eq!(&got.comment_id, &want.comment_id);
            prop_assert_eq!(&got.body, &want.body);
            prop_assert_eq!(got.created_at, want.created_at);
        }

        // a second round trip is exact (canonicalization is idempotent)
        let mut second = Vec::new();
        write_comments_csv(&mut second, &parsed.comments).unwrap();
        let reparsed = parse_archive(posts_csv.as_slice(), second.as_slice()).unwrap();
        prop_assert_eq!(&reparsed.comments, &parsed.comments);
        prop_assert!(reparsed.diagnostics.is_empty());
    }

    #[test]
    fn thread_assembly_ignores_input_order(
        (posts, comments) in arb_archive(),
        seed in 0u64..1000,
    ) {
        let threads = build_threads(&posts, &comments);

        // shuffle both record lists deterministically
        let mut p2 = posts.clone();
        let mut c2 = comments.clone();
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for i in (1..p2.len()).rev() {
            p2.swap(i, (next() % (i as u64 + 1)) as usize);
        }
        for i in (1..c2.len()).rev() {
            c2.swap(i, (next() % (i as u64 + 1)) as usize);
        }
        let shuffled = build_threads(&p2, &c2);

        prop_assert_eq!(threads.len(), shuffled.len());
        for (a, b) in threads.iter().zip(&shuffled) {
            prop_assert_eq!(&a.post.post_id, &b.post.post_id);
            let ids =
                |t: &threadgauge::Thread| t.comments.iter().map(|c| c.comment_id.clone()).collect::<Vec<_>>();
            prop_assert_eq!(ids(a), ids(b));
        }
    }
}
