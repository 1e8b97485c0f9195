#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "keygaze/core/error.hpp"

namespace keygaze::sim {

/// Short lowercase transcription sentences (letters and spaces only).
inline const std::vector<std::string>& default_phrases() {
    static const std::vector<std::string> phrases = {
        "the dog ran to the park",
        "please close the window",
        "we will meet after lunch",
        "my phone battery is low",
        "turn left at the bridge",
        "she bought fresh bread",
        "the train leaves at noon",
        "call me when you arrive",
        "this soup needs more salt",
        "keep the receipt safe",
        "the garden looks lovely",
        "he forgot his umbrella",
        "our flight was delayed",
        "read the manual first",
        "the meeting ran late",
        "bring a warm jacket",
        "the cat sleeps all day",
        "water the plants daily",
        "the store opens at nine",
        "send the report today",
        "i lost my house keys",
        "the movie was too long",
        "they painted the fence",
        "lock the door behind you",
        "the coffee is still hot",
        "pick up milk on the way",
        "the road is very icy",
        "we need a bigger table",
        "check your spelling",
        "the bus was almost empty",
        "thank you for the gift",
        "the lake froze overnight",
        "print two copies please",
        "my sister plays the cello",
        "the printer is jammed",
        "save your work often",
        "the music is too loud",
        "dinner will be ready soon",
        "the bank closes early",
        "wear a hat in the sun",
        "the kids built a fort",
        "rain is expected later",
        "he fixed the old radio",
        "the book has a sad end",
        "feed the fish twice",
        "the hotel was quiet",
        "she writes every morning",
        "clean up your desk",
        "the sky turned orange",
        "we sold the old car",
        "move the chairs outside",
        "the exam starts at ten",
        "buy stamps at the office",
        "the light bulb burned out",
        "join us for breakfast",
        "the river is rising fast",
        "a letter came for you",
        "the tea kettle whistled",
        "open the blue folder",
        "the shoes are too small",
    };
    return phrases;
}

/// One sentence per line; blank lines skipped.
inline std::vector<std::string> read_phrases(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open phrase file " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

} // namespace keygaze::sim
