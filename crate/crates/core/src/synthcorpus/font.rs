//! Fixed 5×7 bitmap font. A character at scale `s` occupies a `6s × 8s`
//! cell: the glyph plus one `s`-wide blank column on the right and one
//! `s`-tall blank row below.

pub const GLYPH_W: usize = 5;
pub const GLYPH_H: usize = 7;

/// Cell width of one character at `scale`.
pub const fn cell_w(scale: usize) -> usize {
    (GLYPH_W + 1) * scale
}

/// Cell height (line pitch) at `scale`.
pub const fn cell_h(scale: usize) -> usize {
    (GLYPH_H + 1) * scale
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Glyph {
    pub character: char,
    rows: [&'static str; GLYPH_H],
}

impl Glyph {
    /// Whether pixel `(x, y)` of the 5×7 bitmap is inked.
    pub fn pixel(&self, x: usize, y: usize) -> bool {
        self.rows[y].as_bytes()[x] == b'#'
    }

    pub fn ink_count(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.bytes().filter(|&b| b == b'#').count())
            .sum()
    }
}

macro_rules! glyphs {
    ($($ch:literal => [$($row:literal),* $(,)?]),* $(,)?) => {
        &[$(Glyph { character: $ch, rows: [$($row),*] }),*]
    };
}

static GLYPHS: &[Glyph] = glyphs![
    'A' => [" ### ", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"],
    'B' => ["#### ", "#   #", "#   #", "#### ", "#   #", "#   #", "#### "],
    'C' => [" ### ", "#   #", "#    ", "#    ", "#    ", "#   #", " ### "],
    'D' => ["#### ", "#   #", "#   #", "#   #", "#   #", "#   #", "#### "],
    'E' => ["#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#####"],
    'F' => ["#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#    "],
    'G' => [" ### ", "#   #", "#    ", "# ###", "#   #", "#   #", " ####"],
    'H' => ["#   #", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"],
    'I' => [" ### ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "],
    'J' => ["  ###", "   # ", "   # ", "   # ", "   # ", "#  # ", " ##  "],
    'K' => ["#   #", "#  # ", "# #  ", "##   ", "# #  ", "#  # ", "#   #"],
    'L' => ["#    ", "#    ", "#    ", "#    ", "#    ", "#    ", "#####"],
    'M' => ["#   #", "## ##", "# # #", "# # #", "#   #", "#   #", "#   #"],
    'N' => ["#   #", "#   #", "##  #", "# # #", "#  ##", "#   #", "#   #"],
    'O' => [" ### ", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "],
    'P' => ["#### ", "#   #", "#   #", "#### ", "#    ", "#    ", "#    "],
    'Q' => [" ### ", "#   #", "#   #", "#   #", "# # #", "#  # ", " ## #"],
    'R' => ["#### ", "#   #", "#   #", "#### ", "# #  ", "#  # ", "#   #"],
    'S' => [" ####", "#    ", "#    ", " ### ", "    #", "    #", "#### "],
    'T' => ["#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  "],
    'U' => ["#   #", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "],
    'V' => ["#   #", "#   #", "#   #", "#   #", "#   #", " # # ", "  #  "],
    'W' => ["#   #", "#   #", "#   #", "# # #", "# # #", "# # #", " # # "],
    'X' => ["#   #", "#   #", " # # ", "  #  ", " # # ", "#   #", "#   #"],
    'Y' => ["#   #", "#   #", " # # ", "  #  ", "  #  ", "  #  ", "  #  "],
    'Z' => ["#####", "    #", "   # ", "  #  ", " #   ", "#    ", "#####"],
    '0' => [" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "],
    '1' => ["  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "],
    '2' => [" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"],
    '3' => ["#####", "   # ", "  #  ", "   # ", "    #", "#   #", " ### "],
    '4' => ["   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "],
    '5' => ["#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "],
    '6' => ["  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "],
    '7' => ["#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "],
    '8' => [" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "],
    '9' => [" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "],
    ' ' => ["     ", "     ", "     ", "     ", "     ", "     ", "     "],
    '.' => ["     ", "     ", "     ", "     ", "     ", " ##  ", " ##  "],
    ',' => ["     ", "     ", "     ", "     ", " ##  ", "  #  ", " #   "],
];

/// Bitmap for `ch`, if the font supports it.
pub fn glyph(ch: char) -> Option<&'static Glyph> {
    GLYPHS.iter().find(|g| g.character == ch)
}

pub fn supported(ch: char) -> bool {
    glyph(ch).is_some()
}

pub fn all_glyphs() -> &'static [Glyph] {
    GLYPHS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_supported_character_has_one_bitmap() {
        let expected: Vec<char> = ('A'..='Z').chain('0'..='9').chain([' ', '.', ',']).collect();
        assert_eq!(GLYPHS.len(), expected.len());
        for ch in expected {
            assert_eq!(GLYPHS.iter().filter(|g| g.character == ch).count(), 1, "{ch:?}");
        }
        for g in GLYPHS {
            assert!(g.rows.iter().all(|r| r.len() == GLYPH_W), "{:?}", g.character);
        }
    }

    #[test]
    fn space_is_blank_and_letters_are_inked() {
        assert_eq!(glyph(' ').unwrap().ink_count(), 0);
        assert!(GLYPHS.iter().filter(|g| g.character != ' ').all(|g| g.ink_count() > 0));
        assert!(glyph('a').is_none());
    }

    #[test]
    fn cell_metric() {
        assert_eq!((cell_w(1), cell_h(1)), (6, 8));
        assert_eq!((cell_w(2), cell_h(2)), (12, 16));
    }
}
