use std::cmp::Ordering;

/// Keeps the `capacity` best elements seen so far.
///
/// Backed by a binary heap whose root is the worst retained element, so each
/// offer costs O(log k) and rejecting a non-improving element costs O(1).
/// `cmp(a, b)` returns `Greater` when `a` ranks ahead of `b`.
pub struct BoundedTopK<T, F> {
    capacity: usize,
    heap: Vec<T>,
    cmp: F,
}

impl<T, F> BoundedTopK<T, F>
where
    F: Fn(&T, &T) -> Ordering,
{
    pub fn new(capacity: usize, cmp: F) -> Self {
        Self {
            capacity,
            heap: Vec::with_capacity(capacity.min(1 << 16)),
            cmp,
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// The element that would be evicted next.
    pub fn worst(&self) -> Option<&T> {
        self.heap.first()
    }

    /// Whether `item` would be retained if offered now.
    pub fn admits(&self, item: &T) -> bool {
        if self.capacity == 0 {
            return false;
        }
        self.heap.len() < self.capacity || (self.cmp)(item, &self.heap[0]) == Ordering::Greater
    }

    pub fn offer(&mut self, item: T) {
        if !self.admits(&item) {
            return;
        }
        if self.heap.len() < self.capacity {
            self.heap.push(item);
            self.sift_up(self.heap.len() - 1);
        } else {
            self.heap[0] = item;
            self.sift_down(0);
        }
    }

    /// Retained elements, best first.
    pub fn into_sorted_vec(self) -> Vec<T> {
        let cmp = self.cmp;
        let mut v = self.heap;
        v.sort_by(|a, b| cmp(b, a));
        v
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if (self.cmp)(&self.heap[parent], &self.heap[i]) == Ordering::Greater {
                self.heap.swap(parent, i);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.heap.len();
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut worst = i;
            if l < n && (self.cmp)(&self.heap[worst], &self.heap[l]) == Ordering::Greater {
                worst = l;
            }
            if r < n && (self.cmp)(&self.heap[worst], &self.heap[r]) == Ordering::Greater {
                worst = r;
            }
            if worst == i {
                break;
            }
            self.heap.swap(i, worst);
            i = worst;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matches_full_sort(values in proptest::collection::vec(-1000i64..1000, 0..200), k in 0usize..50) {
            let mut top = BoundedTopK::new(k, |a: &i64, b: &i64| a.cmp(b));
            for v in &values {
                top.offer(*v);
            }
            let mut expected = values.clone();
            expected.sort_by(|a, b| b.cmp(a));
            expected.truncate(k);
            prop_assert_eq!(top.into_sorted_vec(), expected);
        }
    }

    #[test]
    fn worst_is_root() {
        let mut top = BoundedTopK::new(3, |a: &i32, b: &i32| a.cmp(b));
        for v in [5, 1, 9, 7, 3] {
            top.offer(v);
        }
        assert_eq!(top.worst(), Some(&5));
        assert!(!top.admits(&4));
        assert_eq!(top.len(), 3);
    }
}
