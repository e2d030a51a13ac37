//! Prompt templates, transcribed byte-for-byte; the candidate list and the
//! output-format illustration are the only substitution points.

pub const SYSTEM_PROMPT: &str = "You are a precise visual classifier for hand-object contact detection in \ncluttered scenes.\n\nCRITICAL CONSTRAINTS:\n1. Each hand (left/right) can be in contact with AT MOST ONE object at a time.\n2. \"In contact\" means direct physical touch: grasping, holding, pressing, or \n   any visible contact.\n3. If a hand is not clearly touching any object, you must mark all objects as 0 \n   for that hand.";

pub(crate) const USER_PRE: &str = "Analyze this image for hand–object contact (actual touching, not just reaching).\nVISUAL GUIDANCE:\nThe image has been annotated with colored masks:\n- GREEN dot = Left hand\n- RED dot = Right hand\n- Other COLORED masks = Candidate objects (each object has a unique color)\nCANDIDATE OBJECTS (in order):\n";

pub(crate) const USER_MID: &str = "STRICT DEFINITION OF CONTACT:\nFor this task, contact means clear physical touching in this frame only.\nContact (label = 1) requires BOTH:\n1. Mask intersection:\n   - The hand mask and the object mask share some pixels or directly overlap \n     at the boundary (no visible gap).\n2. Touching region:\n   - The overlap is at a plausible touching area (finger tips, fingers, palm, \n     side of hand) on the visible surface of the object.\nNO Contact (label = 0) in all of these cases:\n- The hand is reaching toward, hovering above, or very close to an object with \n  a visible gap between masks.\n- The hand is aligned in depth (e.g., above or behind the object) but the masks \n  do not intersect.\n- The hand is in a pose that suggests future contact, but there is no current \n  touching in this single frame.\n- There is only a tiny, ambiguous intersection (1–2 pixels) that could be noise \n  or occlusion. In such uncertain cases, choose 0 (no contact).\nIMPORTANT:\n- **Reaching or hovering is NOT contact.**\n- **If you are unsure whether contact is happening, choose 0 (no contact).**\nCONSTRAINTS (VALIDATION CHECK):\n- Each hand can touch AT MOST ONE object.\n  - Sum of left across all objects must be <= 1.\n  - Sum of right across all objects must be <= 1.\n- If a hand is not clearly touching any object, it should have 0 for all objects.\nOUTPUT FORMAT:\nReturn only a JSON object in this exact format (no extra text):\n";

pub(crate) const USER_POST: &str = "\nWhere:\n- 1 = the specified hand is clearly touching that object in this frame.\n- 0 = the specified hand is not touching that object in this frame.";
