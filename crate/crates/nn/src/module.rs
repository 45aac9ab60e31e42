use crate::tensor::Tensor;

/// A tree of named parameters. Implementors list their own leaves and recurse
/// into children with a dotted prefix; every parameter appears exactly once.
pub trait Module {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>);

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>);

    fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.visit("", &mut out);
        out
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        self.visit_mut("", &mut out);
        out
    }

    fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.numel()).sum()
    }
}

pub fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{}.{}", prefix, name)
    }
}

impl<M: Module> Module for Vec<M> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        for (i, m) in self.iter().enumerate() {
            m.visit(&join(prefix, &i.to_string()), out);
        }
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        for (i, m) in self.iter_mut().enumerate() {
            m.visit_mut(&join(prefix, &i.to_string()), out);
        }
    }
}

impl<M: Module> Module for Option<M> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        if let Some(m) = self {
            m.visit(prefix, out);
        }
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        if let Some(m) = self {
            m.visit_mut(prefix, out);
        }
    }
}

/// Implements [`Module`] by listing tensor fields and child-module fields.
#[macro_export]
macro_rules! impl_module {
    ($ty:ty { params: [$($p:ident),* $(,)?], children: [$($c:ident),* $(,)?] }) => {
        impl $crate::module::Module for $ty {
            fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a $crate::Tensor)>) {
                $( out.push(($crate::module::join(prefix, stringify!($p)), &self.$p)); )*
                $( $crate::module::Module::visit(&self.$c, &$crate::module::join(prefix, stringify!($c)), out); )*
            }

            fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut $crate::Tensor)>) {
                $( out.push(($crate::module::join(prefix, stringify!($p)), &mut self.$p)); )*
                $( $crate::module::Module::visit_mut(&mut self.$c, &$crate::module::join(prefix, stringify!($c)), out); )*
            }
        }
    };
}
