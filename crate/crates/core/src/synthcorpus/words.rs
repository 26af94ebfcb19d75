pub(super) const VOCABULARY: &[&str] = &[
    "THE", "A", "OF", "TO", "AND", "IN", "ON", "FOR", "WITH", "AT", "BY", "FROM", "AS", "IS",
    "WAS", "WERE", "HAS", "HAD", "WILL", "SAID", "NEW", "CITY", "COUNCIL", "MAYOR", "STATE",
    "PLAN", "VOTE", "BUDGET", "SCHOOL", "BOARD", "MARKET", "PRICES", "RAIN", "STORM", "RIVER",
    "BRIDGE", "ROAD", "TRAFFIC", "POLICE", "REPORT", "LOCAL", "FARM", "HARVEST", "WHEAT", "CORN",
    "TRADE", "BANK", "LOAN", "RATES", "JOBS", "WORKERS", "UNION", "STRIKE", "TALKS", "DEAL",
    "TEAM", "GAME", "SEASON", "COACH", "PLAYERS", "WIN", "LOSS", "MATCH", "FINAL", "CROWD",
    "MUSEUM", "LIBRARY", "PARK", "FESTIVAL", "MUSIC", "THEATRE", "FILM", "ARTISTS", "SHOW",
    "HEALTH", "HOSPITAL", "DOCTORS", "NURSES", "CLINIC", "WATER", "POWER", "GRID", "SOLAR",
    "WIND", "COAST", "PORT", "SHIPS", "TRAIN", "STATION", "AIRPORT", "FLIGHTS", "TOURISTS",
    "HOUSING", "RENT", "HOMES", "BUILDERS", "PERMITS", "LAND", "TAX", "LAW", "COURT", "JUDGE",
    "JURY", "TRIAL", "CASE", "APPEAL", "RULING", "OFFICIALS", "RESIDENTS", "VOTERS", "ELECTION",
    "DISTRICT", "COUNTY", "REGION", "NATION", "WORLD", "SUMMIT", "LEADERS", "MINISTER", "PARTY",
    "POLICY", "REFORM", "DEBATE", "PUBLIC", "PRIVATE", "FUNDS", "GRANT", "PROJECT", "SITE",
    "WORK", "BEGINS", "ENDS", "OPENS", "CLOSES", "RISES", "FALLS", "GROWS", "SLOWS", "AFTER",
    "BEFORE", "DURING", "UNDER", "OVER", "NEAR", "NORTH", "SOUTH", "EAST", "WEST", "CENTRAL",
    "MORNING", "EVENING", "MONDAY", "TUESDAY", "FRIDAY", "WEEKEND", "YEAR", "MONTH", "WEEK",
    "TODAY", "EARLY", "LATE", "FIRST", "SECOND", "THIRD", "MORE", "LESS", "MOST", "FEW", "MANY",
    "SOME", "ALL", "TWO", "THREE", "FIVE", "TEN", "12", "25", "40", "100", "2021", "1998",
    "OLD", "YOUNG", "LARGE", "SMALL", "HIGH", "LOW", "FULL", "OPEN", "CLEAR", "STRONG", "SAFE",
    "FAIR", "QUIET", "BUSY", "LONG", "SHORT", "RECORD", "RETURN", "REVIEW", "SUPPORT", "CALLS",
    "ASKS", "AGREES", "PLANS", "WARNS", "SAYS", "NOTES", "EXPECTS", "HOPES", "MEETS", "VISITS",
];

pub(super) const MASTHEADS: &[&str] = &[
    "THE DAILY LEDGER",
    "MORNING HERALD",
    "EVENING STAR",
    "THE COUNTY TIMES",
    "VALLEY GAZETTE",
    "HARBOR CHRONICLE",
    "THE WEEKLY POST",
    "RIVERSIDE NEWS",
];

pub(super) const AD_LINES: &[&str] = &["SALE", "OPEN DAILY", "CALL NOW", "BEST PRICES", "VISIT US"];
