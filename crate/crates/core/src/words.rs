//! Shipped English word list used for string test sets and probe pools.

pub const WORDS: &[&str] = &[
    "apple", "banana", "cherry", "grape", "lemon", "mango", "melon", "peach", "pear", "plum",
    "berry", "orange", "olive", "onion", "garlic", "pepper", "carrot", "potato", "tomato", "bread",
    "butter", "cheese", "sugar", "honey", "salt", "water", "coffee", "tea", "milk", "juice",
    "cat", "dog", "horse", "mouse", "tiger", "lion", "zebra", "monkey", "rabbit", "snake",
    "eagle", "falcon", "parrot", "shark", "whale", "dolphin", "otter", "beaver", "camel", "llama",
    "house", "garden", "window", "door", "table", "chair", "lamp", "clock", "mirror", "pillow",
    "river", "ocean", "forest", "desert", "valley", "mountain", "island", "canyon", "meadow", "glacier",
    "red", "blue", "green", "yellow", "purple", "silver", "golden", "black", "white", "violet",
    "music", "guitar", "piano", "violin", "drum", "song", "dance", "poem", "story", "novel",
    "school", "teacher", "student", "pencil", "paper", "book", "letter", "number", "puzzle", "answer",
    "spring", "summer", "autumn", "winter", "morning", "evening", "night", "today", "moment", "season",
    "happy", "quiet", "brave", "clever", "gentle", "lucky", "proud", "silly", "witty", "zesty",
    "jump", "run", "swim", "climb", "write", "read", "sing", "laugh", "smile", "think",
    "rocket", "planet", "comet", "galaxy", "star", "moon", "orbit", "nebula", "quasar", "meteor",
    "kitten", "puppy", "jelly", "cookie", "muffin", "waffle", "pizza", "pasta", "noodle", "taco",
    "bridge", "castle", "tower", "temple", "palace", "harbor", "market", "museum", "library", "station",
    "vivid", "quick", "fuzzy", "jazz", "oxygen", "quartz", "wizard", "yacht", "zipper", "vortex",
    "kayak", "level", "radar", "civic", "noon", "boss", "book", "coffee", "address", "balloon",
    "queen", "knight", "bishop", "pawn", "joker", "sphinx", "fjord", "rhythm", "crypt", "lynx",
    "engine", "wheel", "magnet", "mirror", "copper", "iron", "nickel", "cobalt", "zinc", "argon",
];

/// Fifty fixed probe strings covering every letter, repeated letters,
/// palindromes and short inputs. Used to reject degenerate compositions.
pub const PROBES: [&str; 50] = [
    "apple", "banana", "cherry", "kayak", "level", "book", "jazz", "quartz", "wizard", "oxygen",
    "rhythm", "fjord", "lynx", "sphinx", "vortex", "yacht", "zipper", "queen", "balloon", "address",
    "abc", "xyz", "az", "za", "aa", "zz", "ab", "ba", "aeiou", "bcdfg",
    "hello", "world", "mississippi", "committee", "abracadabra", "zyxwvu", "qwerty", "asdfgh", "zxcvbn", "poiuy",
    "a", "z", "m", "go", "ox", "tick", "tock", "noon", "civic", "gump",
];
