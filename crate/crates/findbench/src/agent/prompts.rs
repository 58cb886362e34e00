//! Interpreter prompts. `{function}` stands for the script handle.

use findbench_core::Category;

pub const SYSTEM: &str = "You now have access to some commands to help complete the user's request. \
You are able to access the user's machine with these commands. In every message you send, include \
'COMMAND:' with your command at the end. Here is a list of commands with explanations of how they are used:

Command: [PYTHON(function.py)]
Explanation: [Run a python script with the given file name. Use quotes for the filename argument. Do \
not use quotes in the function command itself.]

When you use a command, the user will respond with 'Response:' followed by the output of the command. \
Use this output to help the user complete their request.";

pub const NUMERIC: &str = "Hi, your job is to interpret a function f(x) that is implemented in the {function} script. \
f(x) takes numerical inputs. All you can do is call f(x) on a value of x by running PYTHON({function} value). \
Try to describe the function implemented by f(x) by running experiments on it. You can call \
the function on multiple inputs at a time by running PYTHON({function} value1 value2 value3...). \
You can run the function multiple times on the same input. We encourage testing a large range of values before \
writing a description. You can test values between [-128 and 128]. The output could be \
noisy and your goal is to find a good simple description of f(x) that explains most of the function behavior. \
f(x) may combine multiple different operations. There may be an interval inside the domain \
where the function behaves differently. If that is the case, describe that interval. Your description of the \
function should have three parts. First,
[DESCRIPTION]: Describe what the function is doing in language.
[DOMAIN]: What is the domain of the function? Is there an interval where the function displays unexpected \
behavior? What are the numeric bounds of that interval? What is going on there?
[CODE]: Write Python code that approximates the behavior of the function.";

pub const STRINGS: &str = "Hi, your job is to interpret a function f(x) that is implemented in the {function} script. \
f(x) takes string inputs. All you can do is call f(x) on an input string by running PYTHON({function} string). \
Try to describe the function implemented by f(x) by running experiments on it. You can call the function on \
multiple inputs at a time by running PYTHON({function} string1 string2 \
string3...). We encourage testing a large range of inputs before writing a description. The goal is \
to find a good simple description of f(x) that explains most of the function behavior. f(x) may combine \
multiple different operations. Your description of the function should be in the following form. \
[DESCRIPTION]: Describe what the function is doing in language.
[CODE]: Write Python code that approximates the behavior of the function";

pub const RELATIONS: &str = "Hi, your job is to interpret a function f(x) that is implemented in the {function} script. \
f(x) takes word inputs, and applies a rule to the input word. Try to describe the rule implemented by \
f(x) by running experiments on it. We encourage you to test a diverse selection of words spanning real-world \
concepts like places, events, and people. You can call the function on multiple inputs at \
a time by running PYTHON({function} word1 word2 word3 ...).  We encourage running many tests before writing a \
description. The goal is to find a good simple description of f(x) that explains most of the function behavior. \
There may be some inputs where you expect the function to behave a certain way, but it does not. If that is \
the case, describe the part of the domain where the rule the function normally applies, does not hold. Your \
description of the function should have two parts.
[DESCRIPTION]: Describe in language the rule applied by the function.
[DOMAIN]: Is there part of the domain where the rule the function normally applies, does not hold? If so, \
describe that corruption. If not, describe the domain of the function where the rule applies.";

/// Exemplar-only prompt: outputs on fixed inputs, no commands.
pub const EXEMPLARS_ONLY: &str = "Hi, your job is to interpret a function f(x). You cannot run the function. \
It has already been called on a fixed set of inputs:
{response}
Based only on these outputs, find a good simple description of f(x) that explains most of the function behavior. \
Answer in the form requested below.";

/// Appended to the interactive prompt in exemplar-initialized mode.
pub const EXEMPLAR_START: &str = "To start, the function has already been called on these inputs:
{response}
Continue experimenting from here.";

pub fn category_prompt(category: Category) -> &'static str {
    match category {
        Category::Numeric => NUMERIC,
        Category::Strings => STRINGS,
        Category::Relations => RELATIONS,
    }
}

/// The section instructions of a category prompt: everything from `[DESCRIPTION]` on.
pub fn answer_format(category: Category) -> &'static str {
    let p = category_prompt(category);
    p.find("[DESCRIPTION]").map_or(p, |i| &p[i..])
}

pub fn render(template: &str, function: &str, response: &str) -> String {
    template.replace("{function}", function).replace("{response}", response)
}
