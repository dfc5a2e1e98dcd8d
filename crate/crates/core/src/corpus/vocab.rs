//! Closed word lists for the synthetic generator.

pub(crate) struct EventFamily {
    pub lexemes: [&'static str; 4],
    pub before: [&'static str; 6],
    pub after: [&'static str; 6],
}

pub(crate) const FAMILIES: &[EventFamily] = &[
    EventFamily {
        // arrest
        lexemes: ["arrested", "detained", "apprehended", "nabbed"],
        before: [
            "Police received a tip about the suspect.",
            "Officers tracked the suspect down.",
            "Witnesses reported a burglary.",
            "Detectives gathered fingerprint evidence.",
            "A judge signed a warrant.",
            "The suspect tried to flee.",
        ],
        after: [
            "The suspect was booked into jail.",
            "He appeared before a magistrate.",
            "Prosecutors filed charges.",
            "His lawyer requested bail.",
            "Police released a mugshot.",
            "He spent the night in custody.",
        ],
    },
    EventFamily {
        // earthquake
        lexemes: ["struck", "shook", "jolted", "rattled"],
        before: [
            "Pressure built along the fault line.",
            "Seismographs recorded small foreshocks.",
            "Animals behaved strangely overnight.",
            "Geologists warned about tectonic stress.",
            "The ground began trembling slightly.",
            "Residents felt a faint rumble.",
        ],
        after: [
            "Buildings collapsed across the valley.",
            "Rescue teams searched the rubble.",
            "Aftershocks frightened survivors.",
            "Tsunami sirens sounded along the coast.",
            "Hospitals treated injured residents.",
            "Engineers inspected damaged bridges.",
        ],
    },
    EventFamily {
        // hiring
        lexemes: ["hired", "appointed", "recruited", "named"],
        before: [
            "The company posted a job opening.",
            "Recruiters screened many applicants.",
            "She interviewed with the board.",
            "Her references were checked carefully.",
            "The previous manager left abruptly.",
            "Executives negotiated her salary.",
        ],
        after: [
            "She signed an employment contract.",
            "Colleagues welcomed her warmly.",
            "She started onboarding training.",
            "The firm issued a press release.",
            "She received a company laptop.",
            "Her team scheduled a kickoff meeting.",
        ],
    },
    EventFamily {
        // dismissal
        lexemes: ["fired", "dismissed", "sacked", "ousted"],
        before: [
            "Performance reviews were poor repeatedly.",
            "Owners lost patience with him.",
            "The team suffered many defeats.",
            "Management held an emergency meeting.",
            "Complaints about misconduct piled up.",
            "Fans demanded a change publicly.",
        ],
        after: [
            "He cleared out his office.",
            "The club searched for a replacement.",
            "An interim coach took charge.",
            "He received a severance package.",
            "Reporters asked about his future.",
            "His assistant was promoted temporarily.",
        ],
    },
    EventFamily {
        // acquisition
        lexemes: ["acquired", "bought", "purchased", "absorbed"],
        before: [
            "Bankers valued the startup.",
            "Lawyers conducted due diligence.",
            "Shareholders approved a merger vote.",
            "Both boards negotiated terms secretly.",
            "Regulators reviewed antitrust concerns.",
            "Investors speculated about a takeover.",
        ],
        after: [
            "Stock prices jumped sharply.",
            "Employees joined the parent company.",
            "Product lines were integrated slowly.",
            "Founders became wealthy overnight.",
            "Analysts praised the strategic deal.",
            "Some offices were consolidated.",
        ],
    },
    EventFamily {
        // rehab
        lexemes: ["entered", "checked", "admitted", "enrolled"],
        before: [
            "She struggled with addiction for years.",
            "Her family staged an intervention.",
            "She decided to seek treatment.",
            "Doctors recommended inpatient care.",
            "Her publicist arranged a private clinic.",
            "She missed several court dates.",
        ],
        after: [
            "She attended group therapy sessions.",
            "Counselors monitored her recovery.",
            "Paparazzi waited outside the clinic.",
            "She completed a detox program.",
            "Friends visited her on weekends.",
            "She thanked fans for support.",
        ],
    },
    EventFamily {
        // election
        lexemes: ["elected", "clinched", "secured", "captured"],
        before: [
            "Candidates debated on national television.",
            "Volunteers knocked on many doors.",
            "Voters waited in long lines.",
            "Polls showed a tight race.",
            "Campaigns spent millions on ads.",
            "Ballots were counted overnight.",
        ],
        after: [
            "Supporters celebrated in the streets.",
            "The rival conceded defeat.",
            "Inauguration plans were announced.",
            "Foreign leaders sent congratulations.",
            "Transition teams began meeting.",
            "Markets reacted to the result.",
        ],
    },
    EventFamily {
        // shooting
        lexemes: ["shot", "gunned", "wounded", "ambushed"],
        before: [
            "A gunman bought a rifle.",
            "An argument escalated outside a bar.",
            "Neighbors heard loud shouting.",
            "The attacker loaded his weapon.",
            "A car pulled up slowly.",
            "Masked men approached the crowd.",
        ],
        after: [
            "Paramedics rushed victims to hospital.",
            "Police cordoned off the block.",
            "Investigators collected shell casings.",
            "Vigils were held for victims.",
            "Detectives hunted the gunman.",
            "The mayor condemned the violence.",
        ],
    },
    EventFamily {
        // launch
        lexemes: ["launched", "unveiled", "introduced", "debuted"],
        before: [
            "Engineers finished building prototypes.",
            "Marketing teams planned a keynote.",
            "Rumors about the device leaked.",
            "Suppliers manufactured millions of chips.",
            "Testers reported minor bugs.",
            "Invitations were sent to journalists.",
        ],
        after: [
            "Customers lined up outside stores.",
            "Reviewers praised the design.",
            "Preorders sold out quickly.",
            "Competitors cut their prices.",
            "Shipping dates slipped slightly.",
            "Bloggers posted unboxing videos.",
        ],
    },
    EventFamily {
        // wedding
        lexemes: ["married", "wed", "espoused", "eloped"],
        before: [
            "He proposed with a diamond ring.",
            "The couple sent invitations.",
            "Guests flew in from abroad.",
            "A florist decorated the chapel.",
            "Bridesmaids tried on gowns.",
            "They wrote their own vows.",
        ],
        after: [
            "Guests danced at the reception.",
            "The couple cut the cake.",
            "They left for a honeymoon.",
            "Photos appeared in magazines.",
            "Relatives toasted the newlyweds.",
            "She changed her surname.",
        ],
    },
    EventFamily {
        // storm
        lexemes: ["battered", "lashed", "pounded", "swept"],
        before: [
            "Forecasters tracked a tropical depression.",
            "Residents boarded up windows.",
            "Officials ordered coastal evacuations.",
            "Stores ran out of bottled water.",
            "Winds intensified over warm water.",
            "Airlines cancelled hundreds of flights.",
        ],
        after: [
            "Power lines were knocked down.",
            "Streets flooded in low areas.",
            "Crews cleared fallen trees.",
            "Insurers estimated billions in losses.",
            "Shelters housed displaced families.",
            "The governor declared an emergency.",
        ],
    },
    EventFamily {
        // verdict
        lexemes: ["convicted", "sentenced", "condemned", "jailed"],
        before: [
            "Jurors heard closing arguments.",
            "Witnesses testified for weeks.",
            "The defense called an expert.",
            "Prosecutors presented forensic evidence.",
            "The jury deliberated for days.",
            "The defendant pleaded not guilty.",
        ],
        after: [
            "The defendant was led away.",
            "Victims' families hugged each other.",
            "His attorneys vowed to appeal.",
            "Guards escorted him to prison.",
            "Reporters gathered outside the courthouse.",
            "The judge thanked the jurors.",
        ],
    },
    EventFamily {
        // death
        lexemes: ["died", "perished", "succumbed", "expired"],
        before: [
            "He battled cancer for months.",
            "Doctors said his condition worsened.",
            "Relatives gathered at his bedside.",
            "He was admitted to intensive care.",
            "His health declined rapidly.",
            "He fell into a coma.",
        ],
        after: [
            "Tributes poured in from colleagues.",
            "A funeral was held privately.",
            "His family released a statement.",
            "Flags flew at half mast.",
            "Fans left flowers at his home.",
            "Obituaries praised his career.",
        ],
    },
    EventFamily {
        // award
        lexemes: ["honored", "awarded", "decorated", "garlanded"],
        before: [
            "A committee reviewed nominations.",
            "Critics praised her latest work.",
            "She was shortlisted among finalists.",
            "Organizers booked a grand ballroom.",
            "Judges debated the winners secretly.",
            "She wore an elegant gown.",
        ],
        after: [
            "She gave a tearful speech.",
            "Photographers crowded the stage.",
            "Book sales surged afterwards.",
            "Her agent fielded new offers.",
            "She displayed the trophy proudly.",
            "Rivals congratulated her graciously.",
        ],
    },
    EventFamily {
        // resignation
        lexemes: ["resigned", "quit", "abdicated", "withdrew"],
        before: [
            "A scandal engulfed his ministry.",
            "Colleagues urged him to leave.",
            "Leaked emails embarrassed him.",
            "His approval ratings collapsed.",
            "Party leaders held crisis talks.",
            "He consulted closely with advisers.",
        ],
        after: [
            "A successor was sworn in.",
            "He left the capital quietly.",
            "Opposition parties demanded elections.",
            "He wrote a memoir later.",
            "Aides packed up his belongings.",
            "Commentators debated his legacy.",
        ],
    },
    EventFamily {
        // crash
        lexemes: ["crashed", "collided", "smashed", "plunged"],
        before: [
            "The driver was speeding recklessly.",
            "Fog reduced visibility sharply.",
            "The pilot reported engine trouble.",
            "Brakes failed on a steep hill.",
            "Ice covered the highway.",
            "The driver fell asleep briefly.",
        ],
        after: [
            "Firefighters cut open the wreckage.",
            "Traffic backed up for miles.",
            "Investigators examined the black box.",
            "Survivors were airlifted to hospital.",
            "Tow trucks removed the debris.",
            "Authorities closed the road overnight.",
        ],
    },
];

/// Extra head lexemes available to hard clusters.
pub(crate) const EXTRA_LEXEMES: &[&str] = &[
    "happened", "occurred", "unfolded", "transpired", "erupted", "emerged", "surfaced",
    "developed", "materialized", "arose", "proceeded", "ensued", "befell", "came",
    "took", "went", "made", "did", "got", "saw", "left", "met", "ran", "held", "brought",
    "turned", "moved", "began", "ended", "changed", "broke", "set", "put", "kept",
];

/// Inference sentences with no family signal.
pub(crate) const GENERIC_INFERENCES: &[&str] = &[
    "People talked about it online.",
    "Journalists wrote several articles.",
    "Many people were surprised.",
    "It was a busy afternoon.",
    "Someone made a phone call.",
    "Neighbors discussed the news.",
    "A crowd gathered nearby.",
    "Officials declined to comment.",
    "Traffic was heavier than usual.",
    "Television crews arrived later.",
    "Life went on as normal.",
    "Rumors spread quickly around town.",
    "Experts offered differing opinions.",
    "Local shops stayed open.",
    "Photos circulated on social media.",
    "The weather stayed mild.",
    "Schools continued their classes.",
    "Commuters checked their phones.",
    "A spokesperson promised updates.",
    "Onlookers took pictures.",
    "Radio hosts mentioned it briefly.",
    "Residents went about their day.",
    "Analysts waited for more details.",
    "Bystanders shared their accounts.",
];

pub(crate) const SUBJECTS: &[&str] = &[
    "authorities", "reports", "witnesses", "officials", "sources", "sponsors", "observers",
    "agencies", "insiders", "spokesmen",
];

pub(crate) const OBJECTS: &[&str] = &[
    "yesterday", "today", "overnight", "recently", "unexpectedly", "again", "finally",
    "suddenly", "early", "late",
];

pub(crate) const PLACES: &[&str] = &[
    "downtown", "abroad", "nearby", "uptown", "inland", "offshore", "upstate", "locally",
];

pub(crate) const DISTRACTOR_NOUNS: &[&str] = &[
    "weather", "market", "traffic", "museum", "library", "stadium", "harbor", "bakery",
    "festival", "parade", "garden", "bridge",
];

pub(crate) const DISTRACTOR_ADJECTIVES: &[&str] = &[
    "quiet", "busy", "crowded", "calm", "sunny", "rainy", "lively", "empty",
];
