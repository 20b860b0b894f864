#include <array>
#include <string>
#include <vector>

#include "salsa/data.h"
#include "salsa/rng.h"

namespace salsa {

namespace {

const std::vector<std::string> kDeterminers = {
    "the", "a", "every", "some", "my", "your", "his", "her", "our", "their", "this", "that",
};

const std::vector<std::string> kPronouns = {"she", "he", "they", "we", "it", "someone", "nobody"};

const std::vector<std::string> kAdjectives = {
    "big", "small", "old", "young", "red", "blue", "green", "yellow", "quiet", "loud",
    "happy", "sad", "tall", "short", "bright", "dark", "warm", "cold", "soft", "hard",
    "fast", "slow", "heavy", "light", "rich", "poor", "clever", "silly", "brave", "shy",
    "wild", "calm", "strange", "famous", "hungry", "tired", "busy", "lazy", "kind", "cruel",
    "gentle", "proud", "humble", "ancient", "modern", "empty", "full", "broken", "shiny", "dusty",
    "wooden", "golden", "silver", "purple", "orange", "pink", "gray", "white", "black", "brown",
    "narrow", "wide", "deep", "shallow", "sharp", "dull", "sweet", "bitter", "sour", "salty",
    "fresh", "rotten", "clean", "dirty", "lucky", "curious", "nervous", "eager", "grumpy", "jolly",
    "polite", "rude", "secret", "hidden", "open", "distant", "nearby", "friendly", "angry", "sleepy",
    "noisy", "tiny", "huge", "round", "square", "flat", "smooth", "rough", "frozen", "sunny",
    "rainy", "windy", "foggy", "gloomy", "cheerful", "careful", "careless", "honest", "fierce", "elegant",
};

const std::vector<std::string> kNouns = {
    "dog", "cat", "bird", "horse", "cow", "pig", "sheep", "goat", "mouse", "rabbit",
    "fox", "wolf", "bear", "lion", "tiger", "monkey", "snake", "frog", "fish", "duck",
    "teacher", "doctor", "farmer", "baker", "sailor", "pilot", "singer", "painter", "writer", "driver",
    "student", "child", "king", "queen", "prince", "soldier", "guard", "thief", "judge", "nurse",
    "friend", "neighbor", "stranger", "captain", "chef", "poet", "miner", "hunter", "clerk", "tailor",
    "house", "car", "boat", "train", "bike", "tree", "flower", "river", "mountain", "lake",
    "city", "village", "garden", "forest", "road", "bridge", "tower", "castle", "school", "market",
    "book", "letter", "song", "story", "picture", "map", "key", "door", "window", "table",
    "chair", "bed", "lamp", "clock", "phone", "cup", "plate", "spoon", "knife", "bottle",
    "box", "bag", "coat", "hat", "shoe", "ring", "coin", "stone", "rope", "ladder",
    "apple", "bread", "cake", "cheese", "egg", "soup", "rice", "milk", "tea", "honey",
    "ball", "kite", "drum", "piano", "violin", "guitar", "candle", "mirror", "basket", "blanket",
    "cloud", "star", "moon", "storm", "wind", "fire", "snow", "island", "desert", "valley",
    "ship", "wagon", "cart", "tent", "cabin", "barn", "fence", "gate", "well", "shed",
    "hammer", "brush", "pencil", "paper", "ticket", "gift", "crown", "sword", "shield", "lantern",
    "carpet", "pillow", "jacket", "scarf", "glove", "boot", "wallet", "camera", "radio", "engine",
};

const std::vector<std::string> kVerbs = {
    "saw", "found", "lost", "took", "gave", "made", "kept", "left", "met", "heard",
    "liked", "loved", "hated", "missed", "helped", "watched", "followed", "carried", "pushed", "pulled",
    "painted", "cleaned", "washed", "fixed", "broke", "built", "opened", "closed", "moved", "dropped",
    "caught", "chased", "called", "visited", "greeted", "thanked", "warned", "guided", "taught", "fed",
    "bought", "sold", "borrowed", "stole", "hid", "showed", "sent", "brought", "raised", "lifted",
    "held", "touched", "kicked", "threw", "noticed", "admired", "ignored", "praised", "blamed", "trusted",
    "feared", "served", "joined", "entered", "crossed", "climbed", "reached", "passed", "paid", "hired",
    "packed", "wrapped", "filled", "emptied", "tied", "locked", "marked", "counted", "measured", "tested",
    "studied", "remembered", "forgot", "described", "answered", "asked", "invited", "rescued", "protected", "attacked",
    "pleased", "scared", "surprised", "amused", "annoyed", "cooked", "baked", "burned", "planted", "picked",
    "shook", "rolled", "dragged", "steered", "rode", "drew", "wrote", "read", "sang", "played",
    "tasted", "smelled", "weighed", "sorted", "traded", "chose", "won", "needed", "wanted", "offered",
};

const std::vector<std::string> kAdverbs = {
    "quickly", "slowly", "quietly", "loudly", "happily", "sadly", "carefully", "suddenly", "gently", "roughly",
    "barely", "gladly", "boldly", "calmly", "eagerly", "kindly", "proudly", "softly", "warmly", "wisely",
    "today", "yesterday", "again", "twice", "often", "rarely", "early", "late", "soon", "finally",
    "politely", "secretly", "openly", "nervously", "bravely", "lazily", "neatly", "badly", "warily", "alone",
    "together", "silently", "patiently", "awkwardly", "cheerfully",
};

const std::vector<std::string> kPrepositions = {
    "in", "on", "under", "near", "behind", "beside", "above", "below", "across", "through",
    "into", "onto", "around", "along", "past", "toward", "inside", "outside", "beyond", "with",
};

const std::vector<std::string> kConjunctions = {"and", "but", "while", "because", "so"};

const std::string& pick(const std::vector<std::string>& words, Rng& rng) {
  return words[rng.uniformInt(words.size())];
}

void nounPhrase(std::vector<std::string>& out, Rng& rng) {
  out.push_back(pick(kDeterminers, rng));
  if (rng.uniform() < 0.5) {
    out.push_back(pick(kAdjectives, rng));
  }
  out.push_back(pick(kNouns, rng));
}

void clause(std::vector<std::string>& out, Rng& rng) {
  if (rng.uniform() < 0.2) {
    out.push_back(pick(kPronouns, rng));
  } else {
    nounPhrase(out, rng);
  }
  out.push_back(pick(kVerbs, rng));
  nounPhrase(out, rng);
  if (rng.uniform() < 0.35) {
    out.push_back(pick(kPrepositions, rng));
    nounPhrase(out, rng);
  }
  if (rng.uniform() < 0.3) {
    out.push_back(pick(kAdverbs, rng));
  }
}

} // namespace

std::vector<std::string> synthesizeCorpus(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(count);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < count; ++i) {
    words.clear();
    clause(words, rng);
    if (rng.uniform() < 0.15) {
      words.push_back(pick(kConjunctions, rng));
      clause(words, rng);
    }
    std::string line;
    for (const auto& w : words) {
      if (!line.empty()) {
        line += ' ';
      }
      line += w;
    }
    out.push_back(std::move(line));
  }
  return out;
}

} // namespace salsa
