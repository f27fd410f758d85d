//! Component tree of the lower threshold sets of an 8-bit image.
//!
//! Pixels are flooded in increasing intensity order into a union-find
//! forest (4-connectivity). After all pixels of a level are added, every
//! component that gained pixels becomes a new tree node; the nodes it
//! absorbed become its children. A node therefore stands for one distinct
//! pixel set, recorded at the lowest level where it is a connected
//! component of `{p : img(p) <= level}`. It stays the component of its
//! pixels for every level below its parent's.

use crate::imgcore::{BoundingBox, GrayImage};

use super::Polarity;

const NONE: u32 = u32::MAX;

/// One node of the component tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtremalRegion {
    /// Lowest threshold at which this pixel set is a component.
    pub level: u8,
    pub area: usize,
    pub bbox: BoundingBox,
    pub parent: Option<usize>,
    /// Child with the largest area (lowest index on ties); the region's
    /// continuation towards lower levels.
    pub main_child: Option<usize>,
}

/// All extremal regions of one polarity, ordered by creation (increasing
/// level, so parents always come after their children).
#[derive(Clone, Debug)]
pub struct ComponentTree {
    polarity: Polarity,
    width: usize,
    height: usize,
    regions: Vec<ExtremalRegion>,
    /// Smallest region containing each pixel.
    pixel_region: Vec<u32>,
}

struct Forest {
    parent: Vec<u32>,
    size: Vec<u32>,
    bounds: Vec<[u32; 4]>,
    node: Vec<u32>,
}

impl Forest {
    fn new(len: usize) -> Self {
        Self {
            parent: vec![NONE; len],
            size: vec![0; len],
            bounds: vec![[0; 4]; len],
            node: vec![NONE; len],
        }
    }

    fn activate(&mut self, p: usize, x: u32, y: u32) {
        self.parent[p] = p as u32;
        self.size[p] = 1;
        self.bounds[p] = [x, y, x + 1, y + 1];
    }

    fn is_active(&self, p: usize) -> bool {
        self.parent[p] != NONE
    }

    fn find(&mut self, mut p: usize) -> usize {
        while self.parent[p] as usize != p {
            let grand = self.parent[self.parent[p] as usize];
            self.parent[p] = grand;
            p = grand as usize;
        }
        p
    }

    /// Merge the sets of `a` and `b`; nodes the two sets stood for before
    /// this level are pushed to `absorbed`.
    fn union(&mut self, a: usize, b: usize, absorbed: &mut Vec<u32>) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        for r in [ra, rb] {
            if self.node[r] != NONE {
                absorbed.push(self.node[r]);
                self.node[r] = NONE;
            }
        }
        let (big, small) = if self.size[ra] >= self.size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big as u32;
        self.size[big] += self.size[small];
        let (s, t) = (self.bounds[small], self.bounds[big]);
        self.bounds[big] = [s[0].min(t[0]), s[1].min(t[1]), s[2].max(t[2]), s[3].max(t[3])];
    }
}

impl ComponentTree {
    /// Build the tree of `{p : img(p) <= i}` components for dark polarity,
    /// or of the intensity-inverted image for bright polarity.
    pub fn build(img: &GrayImage, polarity: Polarity) -> Self {
        let (width, height) = img.dimensions();
        let values: Vec<u8> = match polarity {
            Polarity::Dark => img.as_slice().to_vec(),
            Polarity::Bright => img.as_slice().iter().map(|&v| 255 - v).collect(),
        };

        // Counting sort, raster order within a level.
        let mut starts = [0usize; 257];
        for &v in &values {
            starts[v as usize + 1] += 1;
        }
        for i in 1..257 {
            starts[i] += starts[i - 1];
        }
        let mut order = vec![0u32; values.len()];
        let mut cursor = starts;
        for (p, &v) in values.iter().enumerate() {
            order[cursor[v as usize]] = p as u32;
            cursor[v as usize] += 1;
        }

        let mut forest = Forest::new(values.len());
        let mut regions: Vec<ExtremalRegion> = Vec::new();
        let mut seeds: Vec<u32> = Vec::new();
        let mut pixel_region = vec![NONE; values.len()];
        let mut absorbed = Vec::new();

        for level in 0..=255u8 {
            let batch = &order[starts[level as usize]..starts[level as usize + 1]];
            if batch.is_empty() {
                continue;
            }
            for &p in batch {
                let p = p as usize;
                forest.activate(p, (p % width) as u32, (p / width) as u32);
            }
            absorbed.clear();
            for &p in batch {
                let p = p as usize;
                let (x, y) = (p % width, p / width);
                if x > 0 && forest.is_active(p - 1) {
                    forest.union(p, p - 1, &mut absorbed);
                }
                if x + 1 < width && forest.is_active(p + 1) {
                    forest.union(p, p + 1, &mut absorbed);
                }
                if y > 0 && forest.is_active(p - width) {
                    forest.union(p, p - width, &mut absorbed);
                }
                if y + 1 < height && forest.is_active(p + width) {
                    forest.union(p, p + width, &mut absorbed);
                }
            }
            for &p in batch {
                let p = p as usize;
                let root = forest.find(p);
                if forest.node[root] == NONE {
                    let [x0, y0, x1, y1] = forest.bounds[root];
                    forest.node[root] = regions.len() as u32;
                    regions.push(ExtremalRegion {
                        level,
                        area: forest.size[root] as usize,
                        bbox: BoundingBox { x0, y0, x1, y1 },
                        parent: None,
                        main_child: None,
                    });
                    seeds.push(root as u32);
                }
                pixel_region[p] = forest.node[root];
            }
            for &child in &absorbed {
                let child = child as usize;
                let root = forest.find(seeds[child] as usize);
                let parent = forest.node[root] as usize;
                regions[child].parent = Some(parent);
                let better = match regions[parent].main_child {
                    None => true,
                    Some(cur) => {
                        let (a, b) = (&regions[child], &regions[cur]);
                        a.area > b.area || (a.area == b.area && child < cur)
                    }
                };
                if better {
                    regions[parent].main_child = Some(child);
                }
            }
        }

        Self {
            polarity,
            width,
            height,
            regions,
            pixel_region,
        }
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn regions(&self) -> &[ExtremalRegion] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// The region covering the whole image.
    pub fn root(&self) -> usize {
        self.regions.len() - 1
    }

    /// Chain of regions containing pixel `(x, y)`, innermost first.
    pub fn ancestors_of_pixel(&self, x: usize, y: usize) -> impl Iterator<Item = usize> + '_ {
        let start = self.pixel_region[y * self.width + x] as usize;
        std::iter::successors(Some(start), move |&r| self.regions[r].parent)
    }

    /// Raster indices of the pixels in region `r`.
    pub fn members(&self, r: usize) -> Vec<usize> {
        (0..self.width * self.height)
            .filter(|&p| {
                self.ancestors_of_pixel(p % self.width, p / self.width)
                    .take_while(|&a| a <= r)
                    .any(|a| a == r)
            })
            .collect()
    }

    /// Region on `r`'s branch at threshold `level`: an ancestor when
    /// `level` is above `r.level`, otherwise a descendant reached through
    /// main children. Clamps to the root or to the branch's leaf.
    pub fn region_at(&self, r: usize, level: i32) -> usize {
        let mut cur = r;
        while let Some(p) = self.regions[cur].parent {
            if i32::from(self.regions[p].level) > level {
                break;
            }
            cur = p;
        }
        while i32::from(self.regions[cur].level) > level {
            match self.regions[cur].main_child {
                Some(c) => cur = c,
                None => break,
            }
        }
        cur
    }
}
